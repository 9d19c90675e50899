//! Frequency function, exponent classification, doubling bounds and blow-up.
use fracfreq::almgren::{
    blowup_profile, classify_mode, doubling_bounds, frequency_trace, vanishing_order,
    EXCLUDED_INNER_RINGS,
};
use fracfreq::field::{solve_linear, BoundaryDatum, HSpec, HalfDiskGrid};
use fracfreq::sphere::{AngularMesh, Spectrum};
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.5)?;
    let mesh = AngularMesh::graded(128, 3.0)?;
    let grid = HalfDiskGrid::new(1.0, 1e-4, 160, mesh.clone())?;
    let spectrum = Spectrum::new(&params, &mesh, 2, 4)?;
    let g = BoundaryDatum::new(0, spectrum.mode(0, 1).expect("mode").profile.clone())?;
    let h = HSpec {
        coefficient: 0.1,
        exponent: 0.5,
    };
    let (field, _) = solve_linear(params, &grid, &g, Some(h))?;

    let trace = frequency_trace(&field)?;
    println!(
        "gamma_hat = {:.8} +- {:.1e} (delta {:.3}), Richardson {:.8}",
        trace.gamma_hat, trace.gamma_stderr, trace.delta_hat, trace.gamma_richardson
    );
    let class = classify_mode(trace.gamma_hat, &spectrum)?;
    println!(
        "k0 = {}, mu_k0 = {:.8}, gap = {:.1e}",
        class.k0, class.mu_k0, class.gap
    );
    let bounds = doubling_bounds(&trace, 0.1);
    println!(
        "K1 = {:.5}, K2 = {:.5}, r^(-2 gamma) H -> {:.5} (spread {:.2}%)",
        bounds.k1,
        bounds.k2,
        bounds.limit_estimate,
        100.0 * bounds.limit_spread
    );
    let tau = grid.radius(EXCLUDED_INNER_RINGS);
    let blowup = blowup_profile(&field, tau, &class, &spectrum)?;
    println!(
        "blow-up at tau = {tau:.2e}: distance to eigenspace {:.2e}",
        blowup.distance_to_eigenspace
    );
    println!("vanishing order: {:?}", vanishing_order(&field)?);
    Ok(())
}
