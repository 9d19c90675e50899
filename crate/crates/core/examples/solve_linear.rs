//! Solve the linear extension problem with and without a Hardy-type potential.
use fracfreq::field::{solve_linear, BoundaryDatum, HSpec, HalfDiskGrid};
use fracfreq::sphere::{AngularMesh, Spectrum};
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.5)?;
    let mesh = AngularMesh::graded(128, 3.0)?;
    let grid = HalfDiskGrid::new(1.0, 1e-4, 160, mesh.clone())?;
    let spectrum = Spectrum::new(&params, &mesh, 0, 1)?;
    let mode = spectrum.mode(0, 1).expect("first mode");
    let g = BoundaryDatum::new(0, mode.profile.clone())?;
    for h in [
        None,
        Some(HSpec {
            coefficient: 0.1,
            exponent: 0.5,
        }),
    ] {
        let (field, report) = solve_linear(params, &grid, &g, h)?;
        let b = field.ball(1.0)?;
        println!(
            "h = {h:?}: residual {:.1e}, CG iterations {}, energy {:.8}, trace L2 {:.8}",
            report.weak_residual, report.cg_iterations, b.energy, b.hardy_trace
        );
    }
    Ok(())
}
