//! Hardy constant, extension constant and the lambda(alpha) correspondence.
use fracfreq::closed_forms::{critical_exponent, hardy_constant, kappa, lambda_of_alpha};
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    for (n, s) in [(2, 0.5), (3, 0.25), (3, 0.5), (3, 0.75), (4, 0.5)] {
        println!(
            "N={n} s={s}: kappa_s = {:.10}, Lambda = {:.10}, 2*(s) = {:.4}",
            kappa(s)?,
            hardy_constant(n, s)?,
            critical_exponent(n, s)
        );
    }
    let half = 0.5 * (3.0 - 1.0);
    for frac in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let alpha = frac * half;
        let lambda = lambda_of_alpha(3, 0.5, alpha)?;
        let p = ProblemParams::new(3, 0.5, lambda)?;
        let e = p.exponents(alpha * alpha - half * half)?;
        println!(
            "alpha = {alpha:.3}: lambda = {lambda:.10}, sigma+ = {:.6}, sigma- = {:.6}",
            e.sigma_plus, e.sigma_minus
        );
    }
    Ok(())
}
