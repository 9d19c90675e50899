//! Picard iteration for the boundary nonlinearity at the critical power.
use fracfreq::field::{solve_semilinear, BoundaryDatum, FSpec, HalfDiskGrid};
use fracfreq::sphere::{AngularMesh, Spectrum};
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.5)?;
    let mesh = AngularMesh::graded(128, 3.0)?;
    let grid = HalfDiskGrid::new(1.0, 1e-4, 160, mesh.clone())?;
    let spectrum = Spectrum::new(&params, &mesh, 0, 1)?;
    let g = BoundaryDatum::new(0, spectrum.mode(0, 1).expect("mode").profile.clone())?.scaled(0.3);
    let f = FSpec {
        coefficient: 0.05,
        power: params.critical_exponent(),
    };
    let (field, report) = solve_semilinear(params, &grid, &g, None, f)?;
    println!("smallness indicator {:.3}", report.smallness);
    for (i, change) in report.history.iter().enumerate() {
        println!("sweep {:>2}: relative change {change:.3e}", i + 1);
    }
    println!(
        "trace at r = 0.01: {:.8}",
        field.trace_at_log(0.01f64.ln()).0
    );
    Ok(())
}
