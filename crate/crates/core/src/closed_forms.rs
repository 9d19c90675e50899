//! Closed-form constants: Gamma, the extension constant, the sharp Hardy
//! constant, the coupling map alpha -> lambda and the characteristic exponents.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Gamma(x + 1))
    LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0))
}

/// Gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!(
            "gamma_fn needs a finite positive argument, got {x}"
        ));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return gamma_pos(x + 1.0) / x;
    }
    let z = x - 1.0;
    let w = z + LANCZOS_G + 0.5;
    // split the power so that moderately large arguments do not overflow early
    let half = w.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (-w).exp() * half * lanczos_sum(z)
}

/// Natural logarithm of Gamma for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!(
            "ln_gamma needs a finite positive argument, got {x}"
        ));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    if x < 15.0 {
        return gamma_pos(x).ln();
    }
    let z = x - 1.0;
    let w = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * w.ln() - w + lanczos_sum(z).ln()
}

/// The extension constant kappa_s = Gamma(1-s) / (2^{2s-1} Gamma(s)).
pub fn kappa(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(gamma_pos(1.0 - s) / (2f64.powf(2.0 * s - 1.0) * gamma_pos(s)))
}

/// Sharp fractional Hardy constant 2^{2s} Gamma^2((N+2s)/4) / Gamma^2((N-2s)/4).
pub fn hardy_constant(n: u32, s: f64) -> Result<f64> {
    check_dimension(n, s)?;
    let nf = n as f64;
    let ratio = (ln_gamma_pos((nf + 2.0 * s) / 4.0) - ln_gamma_pos((nf - 2.0 * s) / 4.0)).exp();
    Ok(4f64.powf(s) * ratio * ratio)
}

/// Coupling lambda(alpha) whose first angular eigenvalue is alpha^2 - ((N-2s)/2)^2.
///
/// Strictly decreasing on [0, (N-2s)/2), from the Hardy constant down to 0.
pub fn lambda_of_alpha(n: u32, s: f64, alpha: f64) -> Result<f64> {
    check_dimension(n, s)?;
    let half = half_gap(n, s);
    if !(0.0..half).contains(&alpha) {
        return domain(format!("alpha must lie in [0, {half}), got {alpha}"));
    }
    let nf = n as f64;
    let lg = ln_gamma_pos((nf + 2.0 * s + 2.0 * alpha) / 4.0)
        + ln_gamma_pos((nf + 2.0 * s - 2.0 * alpha) / 4.0)
        - ln_gamma_pos((nf - 2.0 * s - 2.0 * alpha) / 4.0)
        - ln_gamma_pos((nf - 2.0 * s + 2.0 * alpha) / 4.0);
    Ok(4f64.powf(s) * lg.exp())
}

/// Inverse of [`lambda_of_alpha`] by bisection.
pub fn alpha_of_lambda(n: u32, s: f64, lambda: f64) -> Result<f64> {
    let top = hardy_constant(n, s)?;
    if !(lambda > 0.0 && lambda < top) {
        return domain(format!("lambda must lie in (0, {top}), got {lambda}"));
    }
    let (mut lo, mut hi) = (0.0, half_gap(n, s));
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if lambda_of_alpha(n, s, mid)? > lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The two roots of sigma^2 + (N-2s) sigma - mu = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub mu: f64,
}

impl ExponentPair {
    pub fn gap(&self) -> f64 {
        self.sigma_plus - self.sigma_minus
    }
}

pub fn characteristic_exponents(n: u32, s: f64, mu: f64) -> Result<ExponentPair> {
    check_dimension(n, s)?;
    let h = half_gap(n, s);
    let disc = h * h + mu;
    if !(disc > 0.0) {
        return domain(format!(
            "mu = {mu} is not above the Hardy threshold {}",
            -h * h
        ));
    }
    let root = disc.sqrt();
    // sigma_plus = mu / (h + root) avoids cancellation for small |mu|
    Ok(ExponentPair {
        sigma_plus: mu / (h + root),
        sigma_minus: -h - root,
        mu,
    })
}

/// Vanishing order attached to the eigenvalue `mu_k0`.
pub fn gamma_exponent(n: u32, s: f64, mu_k0: f64) -> Result<f64> {
    Ok(characteristic_exponents(n, s, mu_k0)?.sigma_plus)
}

/// mu(sigma) = sigma^2 + (N-2s) sigma, inverse of [`gamma_exponent`].
pub fn mu_of_exponent(n: u32, s: f64, sigma: f64) -> f64 {
    sigma * sigma + 2.0 * half_gap(n, s) * sigma
}

/// Critical trace exponent 2N/(N-2s).
pub fn critical_exponent(n: u32, s: f64) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0 * s)
}

/// (N-2s)/2.
pub fn half_gap(n: u32, s: f64) -> f64 {
    0.5 * (n as f64 - 2.0 * s)
}

/// Surface measure of the unit sphere S^d in R^{d+1}.
pub fn sphere_area(d: u32) -> f64 {
    let k = (d as f64 + 1.0) / 2.0;
    2.0 * PI.powf(k) / gamma_pos(k)
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("order s must lie in (0, 1), got {s}"));
    }
    Ok(())
}

fn check_dimension(n: u32, s: f64) -> Result<()> {
    check_order(s)?;
    if n == 0 || (n as f64) <= 2.0 * s {
        return domain(format!("need N > 2s, got N = {n}, s = {s}"));
    }
    Ok(())
}

/// Dimension, order and Hardy coupling of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: u32,
    pub s: f64,
    pub lambda: f64,
}

impl ProblemParams {
    pub fn new(n: u32, s: f64, lambda: f64) -> Result<Self> {
        check_dimension(n, s)?;
        let top = hardy_constant(n, s)?;
        if !lambda.is_finite() || lambda >= top {
            return domain(format!(
                "lambda = {lambda} must stay below the Hardy constant {top}"
            ));
        }
        Ok(Self { n, s, lambda })
    }

    /// Parameters with lambda = lambda(alpha).
    pub fn from_alpha(n: u32, s: f64, alpha: f64) -> Result<Self> {
        Self::new(n, s, lambda_of_alpha(n, s, alpha)?)
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.s).expect("validated order")
    }

    pub fn hardy_constant(&self) -> f64 {
        hardy_constant(self.n, self.s).expect("validated dimension")
    }

    pub fn half_gap(&self) -> f64 {
        half_gap(self.n, self.s)
    }

    /// N - 2s.
    pub fn gap(&self) -> f64 {
        self.n as f64 - 2.0 * self.s
    }

    pub fn exponents(&self, mu: f64) -> Result<ExponentPair> {
        characteristic_exponents(self.n, self.s, mu)
    }

    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.n, self.s)
    }

    /// |S^{N-1}|, the measure of the flat boundary's unit sphere.
    pub fn boundary_sphere_area(&self) -> f64 {
        sphere_area(self.n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_against_high_precision_values() {
        let cases = [
            (0.3, 2.991_568_987_687_590_628_3),
            (0.5, 1.772_453_850_905_516_027_3),
            (0.001, 999.423_772_484_595_466_11),
            (7.5, 1_871.254_305_797_788_346_5),
            (0.05, 19.470_085_311_255_512_864),
            (30.2, 1.741_009_444_591_135_386_0e31),
            (5.0, 24.0),
        ];
        for (x, want) in cases {
            let got = gamma_fn(x).unwrap();
            assert!(rel(got, want) < 1e-12, "Gamma({x}) = {got}, want {want}");
            assert!((ln_gamma(x).unwrap() - want.ln()).abs() < 1e-12 * want.ln().abs().max(1.0));
        }
    }

    #[test]
    fn gamma_rejects_non_positive() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
        assert!(ln_gamma(f64::NAN).is_err());
    }

    #[test]
    fn kappa_values() {
        assert!(rel(kappa(0.5).unwrap(), 1.0) < 1e-14);
        assert!(rel(kappa(0.25).unwrap(), 0.477_988_797_486_124_995_36) < 1e-12);
        assert!(rel(kappa(0.75).unwrap(), 2.092_099_240_106_203_297_9) < 1e-12);
        assert!(rel(kappa(0.1).unwrap(), 0.195_573_567_195_317_441_93) < 1e-12);
        assert!(kappa(1.0).is_err() && kappa(0.0).is_err());
    }

    // Reference values are independent high-precision evaluations; the first
    // one happens to equal 2/pi.
    #[test]
    #[allow(clippy::approx_constant)]
    fn hardy_constant_values() {
        let cases = [
            (3, 0.5, 0.636_619_772_367_581_343_08),
            (2, 0.5, 0.228_473_290_522_231_812_69),
            (4, 0.5, 1.094_219_807_613_238_319_4),
            (3, 0.25, 0.815_977_917_519_767_359_86),
            (1, 0.25, 0.139_999_677_452_482_630_87),
        ];
        for (n, s, want) in cases {
            assert!(
                rel(hardy_constant(n, s).unwrap(), want) < 1e-12,
                "N={n} s={s}"
            );
        }
        assert!(hardy_constant(1, 0.5).is_err());
    }

    #[test]
    fn lambda_of_alpha_values() {
        let cases = [
            (0.1, 0.631_375_151_467_504_309_90),
            (0.25, 0.603_553_390_593_273_762_20),
            (0.5, 0.5),
            (0.75, 0.310_660_171_779_821_286_60),
        ];
        for (a, want) in cases {
            assert!(rel(lambda_of_alpha(3, 0.5, a).unwrap(), want) < 1e-12);
        }
        assert!(
            rel(
                lambda_of_alpha(2, 0.3, 0.2).unwrap(),
                0.420_668_774_317_927_118_07
            ) < 1e-12
        );
        assert!(rel(lambda_of_alpha(3, 0.5, 0.0).unwrap(), 2.0 / PI) < 1e-13);
        assert!(lambda_of_alpha(3, 0.5, 1.0).is_err());
        assert!(lambda_of_alpha(3, 0.5, 0.999_999).unwrap() < 1e-5);
    }

    #[test]
    fn alpha_of_lambda_inverts() {
        assert!((alpha_of_lambda(3, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-12);
        let a = 0.3 * half_gap(4, 0.7);
        let l = lambda_of_alpha(4, 0.7, a).unwrap();
        assert!((alpha_of_lambda(4, 0.7, l).unwrap() - a).abs() < 1e-12);
        assert!(alpha_of_lambda(3, 0.5, 2.0 / PI - 1e-9).unwrap() < 1e-3);
        assert!(alpha_of_lambda(3, 0.5, 0.0).is_err());
        assert!(alpha_of_lambda(3, 0.5, 0.7).is_err());
    }

    #[test]
    fn exponent_examples() {
        let e = characteristic_exponents(3, 0.5, 0.0).unwrap();
        assert_eq!(e.sigma_plus, 0.0);
        assert!((e.sigma_minus + 2.0).abs() < 1e-15);
        assert!((gamma_exponent(3, 0.5, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma_exponent(4, 0.3, 4.4).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_exponent(3, 0.5, -0.75).unwrap() + 0.5).abs() < 1e-15);
        assert!(characteristic_exponents(3, 0.5, -1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(3, 0.5, 0.5).is_ok());
        assert!(ProblemParams::new(3, 0.5, 0.64).is_err());
        assert!(ProblemParams::new(1, 0.5, 0.0).is_err());
        assert!(ProblemParams::new(3, 1.0, 0.0).is_err());
        let p = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        assert!((p.lambda - 0.5).abs() < 1e-14);
        assert!(rel(sphere_area(2), 4.0 * PI) < 1e-14);
        assert!(rel(sphere_area(0), 2.0) < 1e-14);
    }
}
