//! Dimensions and norms of spherical harmonics on S^{N-1}.

use std::f64::consts::PI;

use crate::closed_forms::sphere_area;
use crate::quadrature::GaussRule;

fn binomial(n: i64, k: i64) -> u128 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Dimension of the space of degree-`ell` spherical harmonics on S^{N-1}.
/// Zero when no such harmonics exist (N = 1, ell >= 2).
pub fn multiplicity(n: u32, ell: u32) -> usize {
    let d = n as i64 - 1;
    let l = ell as i64;
    (binomial(l + d, d) - binomial(l + d - 2, d)) as usize
}

/// Integral over S^{N-1} of |Y|^q for the L2-normalized zonal harmonic of degree `ell`.
pub fn harmonic_lq_norm(n: u32, ell: u32, q: f64) -> f64 {
    let d = n - 1;
    if ell == 0 {
        let area = sphere_area(d);
        return area * area.powf(-q / 2.0);
    }
    match d {
        0 => 2.0 * 2f64.powf(-q / 2.0),
        1 => {
            // Y = cos(ell w)/sqrt(pi)
            let rule = GaussRule::legendre(16);
            let cells = 8 * ell as usize;
            rule.integrate_composite(0.0, 2.0 * PI, cells, |w| {
                ((ell as f64 * w).cos() / PI.sqrt()).abs().powf(q)
            })
        }
        _ => {
            // zonal Gegenbauer profile in the polar angle of S^d
            let alpha = (d as f64 - 1.0) / 2.0;
            let rule = GaussRule::legendre(16);
            let cells = 16 * ell as usize;
            let weight = |t: f64| t.sin().powi(d as i32 - 1);
            let base = sphere_area(d - 1);
            let raw = |p: f64| {
                base * rule.integrate_composite(0.0, PI, cells, |t| {
                    gegenbauer(ell, alpha, t.cos()).abs().powf(p) * weight(t)
                })
            };
            let norm2 = raw(2.0);
            raw(q) / norm2.powf(q / 2.0)
        }
    }
}

fn gegenbauer(n: u32, alpha: f64, x: f64) -> f64 {
    let (mut c0, mut c1) = (1.0, 2.0 * alpha * x);
    if n == 0 {
        return c0;
    }
    for k in 2..=n {
        let k = k as f64;
        let c2 = (2.0 * x * (k + alpha - 1.0) * c1 - (k + 2.0 * alpha - 2.0) * c0) / k;
        c0 = c1;
        c1 = c2;
    }
    c1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities() {
        for ell in 0..6 {
            assert_eq!(multiplicity(3, ell), 2 * ell as usize + 1);
            assert_eq!(multiplicity(2, ell), if ell == 0 { 1 } else { 2 });
        }
        assert_eq!(multiplicity(1, 0), 1);
        assert_eq!(multiplicity(1, 1), 1);
        assert_eq!(multiplicity(1, 2), 0);
        // (2l+N-2)/(l+N-2) C(l+N-2, l) for N >= 3
        for n in 3..8u32 {
            for ell in 1..7u32 {
                let c = binomial((ell + n - 2) as i64, ell as i64) as f64;
                let want = (2 * ell + n - 2) as f64 / (ell + n - 2) as f64 * c;
                assert_eq!(multiplicity(n, ell) as f64, want.round());
            }
        }
    }

    #[test]
    fn l2_normalization() {
        for (n, ell) in [(1, 1), (2, 0), (2, 3), (3, 1), (3, 4), (4, 2), (5, 1)] {
            assert!(
                (harmonic_lq_norm(n, ell, 2.0) - 1.0).abs() < 1e-12,
                "N={n} l={ell}"
            );
        }
    }

    #[test]
    fn l4_norm_of_first_harmonic_on_s2() {
        // Y = sqrt(3/4pi) cos t: integral of Y^4 = 9/(16 pi^2) * 4pi/5
        let want = 9.0 / (16.0 * PI * PI) * 4.0 * PI / 5.0;
        assert!((harmonic_lq_norm(3, 1, 4.0) - want).abs() < 1e-12);
    }
}
