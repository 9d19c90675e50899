//! Mode-by-mode solution, beta coefficients and comparison with the field solver.
use fracfreq::almgren::{classify_mode, frequency_trace};
use fracfreq::field::{solve_linear, weighted_l2_distance, BoundaryDatum, HSpec, HalfDiskGrid};
use fracfreq::fourier::{beta_coefficients, picard_semilinear_modes};
use fracfreq::sphere::{AngularMesh, Spectrum};
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.5)?;
    let mesh = AngularMesh::graded(128, 3.0)?;
    let grid = HalfDiskGrid::new(1.0, 1e-4, 160, mesh.clone())?;
    let spectrum = Spectrum::new(&params, &mesh, 0, 4)?;
    let profile: Vec<f64> = spectrum.modes[0]
        .profile
        .iter()
        .zip(&spectrum.modes[1].profile)
        .map(|(a, b)| a + 0.5 * b)
        .collect();
    let g = BoundaryDatum::new(0, profile)?;
    let h = Some(HSpec {
        coefficient: 0.1,
        exponent: 0.5,
    });

    let (exp, basis) = picard_semilinear_modes(params, &grid, &g, h, None, None, 1e-10)?;
    println!(
        "{} modes, {} sweeps, ODE residual {:.1e}",
        exp.truncation(),
        exp.iterations,
        exp.ode_residual
    );
    let rebuilt = exp.reconstruct(&grid, &basis)?;
    let (field, _) = solve_linear(params, &grid, &g, h)?;
    println!(
        "distance to the field solve: {:.2e}",
        weighted_l2_distance(&rebuilt, &field)?
    );

    let class = classify_mode(frequency_trace(&field)?.gamma_hat, &spectrum)?;
    for b in beta_coefficients(&field, &spectrum, &class, 1.0)? {
        println!(
            "beta: boundary {:.6} + correction {:.6} = {:.6}, direct limit {:.6}",
            b.boundary_term, b.correction, b.formula, b.direct
        );
    }
    Ok(())
}
