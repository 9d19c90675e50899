//! Hardy, trace Hardy and coercivity checks, Kelvin identities and the
//! report-only Sobolev ratio.
use fracfreq::field::HalfDiskGrid;
use fracfreq::inequality::{
    coercivity, hardy_boundary, hardy_trace, kelvin_identity, random_field, sobolev_trace_report,
};
use fracfreq::sphere::AngularMesh;
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.5)?;
    let mesh = AngularMesh::graded(64, 3.0)?;
    let grid = HalfDiskGrid::new(1.0, 1e-4, 48, mesh.clone())?;
    for seed in 0..3 {
        let field = random_field(params, &grid, seed as u32, seed)?;
        for rep in [
            hardy_boundary(&field, 0.1)?,
            hardy_trace(&field, 0.1)?,
            coercivity(&field, 0.1, params.lambda)?,
            sobolev_trace_report(&field, 0.1)?,
        ] {
            println!(
                "seed {seed} {:<15} lhs {:>12.5e} rhs {:>12.5e} passed {:?} ratio {:?}",
                rep.name, rep.lhs, rep.rhs, rep.passed, rep.empirical_constant
            );
        }
    }
    let ones = vec![1.0; mesh.len()];
    let k = kelvin_identity(&params, &mesh, 0, &ones, 0.0, 64)?;
    println!(
        "Kelvin, w = 1: energy residual {:.1e}, trace residual {:.1e}",
        k.energy_residual, k.trace_residual
    );
    let sine = mesh.sample(f64::sin);
    let k = kelvin_identity(&params, &mesh, 1, &sine, 1.0, 64)?;
    println!(
        "Kelvin, w = r sin(phi): energy residual {:.1e}",
        k.energy_residual
    );
    Ok(())
}
