//! Angular eigenvalues of the half-sphere problem for a few harmonic degrees.
use fracfreq::sphere::{AngularMesh, Spectrum};
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.5)?;
    let mesh = AngularMesh::graded(256, 3.0)?;
    let spectrum = Spectrum::new(&params, &mesh, 2, 3)?;
    println!(
        "{:>3} {:>4} {:>4} {:>14} {:>12}",
        "k", "ell", "idx", "mu", "sigma+"
    );
    for (k, mode, copy) in spectrum.enumerate().take(12) {
        if copy > 0 {
            continue;
        }
        let sigma = params.exponents(mode.mu)?.sigma_plus;
        println!(
            "{k:>3} {:>4} {:>4} {:>14.9} {:>12.8}  (multiplicity {})",
            mode.ell, mode.index_within_ell, mode.mu, sigma, mode.multiplicity
        );
    }
    Ok(())
}
