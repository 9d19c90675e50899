//! Frequency function analysis: N(r) on the rings, the limit gamma, the
//! doubling bounds, blow-up profiles and the classification of gamma
//! against the angular spectrum.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::field::{frequency, ExtensionField};
use crate::sphere::{AngularForms, Spectrum};

/// Rings nearest r_min are influenced by the inner closure and are left out
/// of every fit.
pub const EXCLUDED_INNER_RINGS: usize = 2;
/// Width (in decades) of the innermost window used for the limit fit.
pub const FIT_DECADES: f64 = 1.5;
/// Absolute floor on the agreement tolerance between the two gamma estimators.
pub const AGREEMENT_FLOOR: f64 = 1e-6;
/// Eigenvalues closer than this (relative to 1 + |mu|) are one eigenspace.
pub const EIGENSPACE_TOL: f64 = 1e-8;

/// Samples of H, D, N on the grid rings, innermost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub radii: Vec<f64>,
    pub h_values: Vec<f64>,
    pub d_values: Vec<f64>,
    pub n_values: Vec<f64>,
    /// Least-squares limit of N(r) = gamma + C r^delta.
    pub gamma_hat: f64,
    pub gamma_stderr: f64,
    pub delta_hat: f64,
    pub fit_coefficient: f64,
    /// Aitken extrapolation from the three innermost usable rings.
    pub gamma_richardson: f64,
    /// Empirical sup of N over the samples.
    pub upper_bound: f64,
    /// -(N - 2s)/2, the lower bound every sample must exceed.
    pub lower_bound: f64,
}

impl FrequencyTrace {
    /// Whether the fit and the extrapolation agree within three standard errors.
    pub fn estimators_agree(&self) -> bool {
        let tol = 3.0 * self.gamma_stderr.max(AGREEMENT_FLOOR);
        (self.gamma_hat - self.gamma_richardson).abs() <= tol
    }

    /// Every N sample lies strictly above -(N - 2s)/2.
    pub fn above_lower_bound(&self) -> bool {
        self.n_values.iter().all(|&n| n > self.lower_bound)
    }

    /// Largest decrease of N between consecutive rings moving outwards.
    pub fn monotonicity_defect(&self) -> f64 {
        self.n_values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    /// Population standard deviation of N over all samples.
    pub fn n_stddev(&self) -> f64 {
        let k = self.n_values.len() as f64;
        let mean = self.n_values.iter().sum::<f64>() / k;
        (self
            .n_values
            .iter()
            .map(|n| (n - mean).powi(2))
            .sum::<f64>()
            / k)
            .sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,H,D,N\n");
        for i in 0..self.radii.len() {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.radii[i], self.h_values[i], self.d_values[i], self.n_values[i]
            );
        }
        s
    }
}

/// Sample N(r) on every ring and extract its limit as r -> 0.
pub fn frequency_trace(field: &ExtensionField) -> Result<FrequencyTrace> {
    let grid = &field.grid;
    let rings = grid.rings();
    let mut radii = Vec::with_capacity(rings);
    let mut h_values = Vec::with_capacity(rings);
    let mut d_values = Vec::with_capacity(rings);
    let mut n_values = Vec::with_capacity(rings);
    for i in 0..rings {
        let r = grid.radius(i);
        let s = field.sphere(r)?;
        if !(s.h > 0.0) {
            return Err(Error::Integrity(format!(
                "H(r) = {:e} is not positive at r = {r:e}; the field is trivial there",
                s.h
            )));
        }
        let n = frequency(field, r)?;
        radii.push(r);
        h_values.push(s.h);
        d_values.push(n * s.h);
        n_values.push(n);
    }
    let start = EXCLUDED_INNER_RINGS;
    let window_end = radii[start] * 10f64.powf(FIT_DECADES);
    let end = radii
        .iter()
        .position(|&r| r > window_end * (1.0 + 1e-12))
        .unwrap_or(rings);
    if end - start < 6 {
        return domain("too few rings in the fit window; refine the radial grid");
    }
    let fit = fit_power_limit(&radii[start..end], &n_values[start..end]);
    let (a2, a3, a4) = (n_values[start], n_values[start + 1], n_values[start + 2]);
    let (d1, d2) = (a3 - a2, a4 - a3);
    let scale = a2.abs().max(1.0);
    let gamma_richardson = if (d2 - d1).abs() > 1e-13 * scale && (d2 / d1) > 1.0 {
        a2 - d1 * d1 / (d2 - d1)
    } else {
        a2
    };
    let upper_bound = n_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FrequencyTrace {
        radii,
        h_values,
        d_values,
        n_values,
        gamma_hat: fit.gamma,
        gamma_stderr: fit.stderr,
        delta_hat: fit.delta,
        fit_coefficient: fit.coefficient,
        gamma_richardson,
        upper_bound,
        lower_bound: -field.params.half_gap(),
    })
}

struct PowerFit {
    gamma: f64,
    coefficient: f64,
    delta: f64,
    stderr: f64,
}

/// Fit y = gamma + C x^delta + C' x^{2 delta}. For fixed delta the fit is
/// linear; delta is scanned on a grid and refined by golden section. The
/// standard error comes from the Jacobian of all four parameters.
fn fit_power_limit(x: &[f64], y: &[f64]) -> PowerFit {
    let rss_at = |delta: f64| fit_fixed_delta(x, y, delta).map_or(f64::INFINITY, |f| f.rss);
    let mut best = (f64::INFINITY, 0.0);
    for step in 1..=400 {
        let delta = 0.01 * step as f64;
        let r = rss_at(delta);
        if r < best.0 {
            best = (r, delta);
        }
    }
    if !best.0.is_finite() {
        return PowerFit {
            gamma: y[0],
            coefficient: 0.0,
            delta: 0.0,
            stderr: f64::INFINITY,
        };
    }
    let (mut a, mut b) = ((best.1 - 0.01).max(1e-3), best.1 + 0.01);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - golden * (b - a);
        let d = a + golden * (b - a);
        if rss_at(c) < rss_at(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    let delta = if rss_at(mid) < best.0 { mid } else { best.1 };
    let sol = fit_fixed_delta(x, y, delta).expect("finite at the optimum");
    let (c1, c2) = (sol.coeffs[1], sol.coeffs[2]);
    let jac = [
        vec![1.0; x.len()],
        x.iter().map(|v| v.powf(delta)).collect(),
        x.iter().map(|v| v.powf(2.0 * delta)).collect(),
        x.iter()
            .map(|v| (c1 * v.powf(delta) + 2.0 * c2 * v.powf(2.0 * delta)) * v.ln())
            .collect::<Vec<f64>>(),
    ];
    let sigma2 = sol.rss / (x.len() as f64 - 4.0).max(1.0);
    let stderr = match unscaled_variances(&jac) {
        Some(v) => (sigma2 * v[0]).sqrt(),
        // A vanishing correction makes delta unidentifiable; fall back to the
        // linear-model error.
        None => (sigma2 * sol.unscaled[0]).sqrt(),
    };
    PowerFit {
        gamma: sol.coeffs[0],
        coefficient: c1,
        delta,
        stderr,
    }
}

fn fit_fixed_delta(x: &[f64], y: &[f64], delta: f64) -> Option<LeastSquares> {
    let t: Vec<f64> = x.iter().map(|v| v.powf(delta)).collect();
    let cols = [
        vec![1.0; x.len()],
        t.clone(),
        t.iter().map(|v| v * v).collect(),
    ];
    least_squares(&cols, y)
}

struct LeastSquares {
    coeffs: Vec<f64>,
    /// diag((A^T A)^{-1})
    unscaled: Vec<f64>,
    rss: f64,
}

struct Qr {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

/// Modified Gram-Schmidt; `None` for numerical rank deficiency.
fn qr(cols: &[Vec<f64>]) -> Option<Qr> {
    let k = cols.len();
    let mut q: Vec<Vec<f64>> = cols.to_vec();
    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        for i in 0..j {
            let d: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[i][j] = d;
            let qi = q[i].clone();
            for (a, b) in q[j].iter_mut().zip(&qi) {
                *a -= d * b;
            }
        }
        let norm = q[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = cols[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 1e-12 * scale) {
            return None;
        }
        r[j][j] = norm;
        for a in q[j].iter_mut() {
            *a /= norm;
        }
    }
    Some(Qr { q, r })
}

/// diag((R^T R)^{-1}) as the squared row norms of R^{-1}.
fn inverse_row_norms(r: &[Vec<f64>]) -> Vec<f64> {
    let k = r.len();
    let mut rinv = vec![vec![0.0; k]; k];
    for j in 0..k {
        rinv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let v: f64 = ((i + 1)..=j).map(|l| r[i][l] * rinv[l][j]).sum();
            rinv[i][j] = -v / r[i][i];
        }
    }
    rinv.iter()
        .map(|row| row.iter().map(|v| v * v).sum())
        .collect()
}

fn unscaled_variances(cols: &[Vec<f64>]) -> Option<Vec<f64>> {
    qr(cols).map(|f| inverse_row_norms(&f.r))
}

fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Option<LeastSquares> {
    let Qr { q, r } = qr(cols)?;
    let k = cols.len();
    let qty: Vec<f64> = q
        .iter()
        .map(|c| c.iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    let mut coeffs = vec![0.0; k];
    for i in (0..k).rev() {
        let v: f64 = ((i + 1)..k).map(|j| r[i][j] * coeffs[j]).sum();
        coeffs[i] = (qty[i] - v) / r[i][i];
    }
    let rss: f64 = (0..y.len())
        .map(|i| {
            let fit: f64 = (0..k).map(|j| cols[j][i] * coeffs[j]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    Some(LeastSquares {
        coeffs,
        unscaled: inverse_row_norms(&r),
        rss,
    })
}

/// Nearest spectral match of an exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// 1-based index of the first copy of the eigenvalue in mu_1 <= mu_2 <= ...
    pub k0: usize,
    pub ell: u32,
    pub mu_k0: f64,
    /// gamma^2 + (N - 2s) gamma.
    pub mu_hat: f64,
    /// |mu_hat - mu_k0| over the distance to the nearest other distinct eigenvalue.
    pub gap: f64,
    pub multiplicity: usize,
    pub confident: bool,
}

/// Match gamma_hat to the eigenvalue mu with sigma+(mu) = gamma_hat.
pub fn classify_mode(gamma_hat: f64, spectrum: &Spectrum) -> Result<Classification> {
    let c = spectrum.params.gap();
    let mu_hat = gamma_hat * gamma_hat + c * gamma_hat;
    let distinct = spectrum.distinct_values(EIGENSPACE_TOL);
    if distinct.is_empty() {
        return domain("empty spectrum");
    }
    let (idx, &(mu, mult)) = distinct
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - mu_hat).abs().total_cmp(&(b.1 .0 - mu_hat).abs()))
        .expect("nonempty");
    if idx + 1 == distinct.len() && mu_hat > mu {
        // Beyond the computed range the next eigenvalue is unknown.
        let spacing = if idx > 0 {
            mu - distinct[idx - 1].0
        } else {
            f64::INFINITY
        };
        if mu_hat - mu > 0.5 * spacing {
            return domain(format!(
                "spectrum does not bracket mu = {mu_hat:.6}; compute more modes"
            ));
        }
    }
    let neighbor = distinct
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, d)| (d.0 - mu).abs())
        .fold(f64::INFINITY, f64::min);
    let gap = (mu_hat - mu).abs() / neighbor;
    let k0 = distinct[..idx].iter().map(|d| d.1).sum::<usize>() + 1;
    let ell = spectrum
        .modes
        .iter()
        .find(|m| (m.mu - mu).abs() <= EIGENSPACE_TOL * (1.0 + mu.abs()))
        .map_or(0, |m| m.ell);
    Ok(Classification {
        k0,
        ell,
        mu_k0: mu,
        mu_hat,
        gap,
        multiplicity: mult,
        confident: gap < 0.5,
    })
}

/// Two-sided growth bounds of H against r^{2 gamma}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingBounds {
    pub gamma: f64,
    pub sigma: f64,
    /// max H(r) / r^{2 gamma}
    pub k1: f64,
    /// min H(r) / r^{2 gamma + sigma}
    pub k2: f64,
    /// (r, r^{-2 gamma} H(r)) over the innermost usable decade.
    pub limit_samples: Vec<(f64, f64)>,
    /// (max - min) / mean of the limit samples.
    pub limit_spread: f64,
    pub limit_estimate: f64,
}

impl DoublingBounds {
    pub fn upper_holds(&self) -> bool {
        self.k1.is_finite()
    }

    pub fn lower_holds(&self) -> bool {
        self.k2 > 0.0
    }

    /// r^{-2 gamma} H(r) settles to a positive value within 5%.
    pub fn stabilized(&self) -> bool {
        self.limit_estimate > 0.0 && self.limit_spread <= 0.05
    }
}

pub fn doubling_bounds(trace: &FrequencyTrace, sigma: f64) -> DoublingBounds {
    let g = trace.gamma_hat;
    let mut k1 = 0.0f64;
    let mut k2 = f64::INFINITY;
    for (&r, &h) in trace.radii.iter().zip(&trace.h_values) {
        k1 = k1.max(h / r.powf(2.0 * g));
        k2 = k2.min(h / r.powf(2.0 * g + sigma));
    }
    let start = EXCLUDED_INNER_RINGS.min(trace.radii.len() - 1);
    let top = trace.radii[start] * 10.0 * (1.0 + 1e-12);
    let limit_samples: Vec<(f64, f64)> = trace
        .radii
        .iter()
        .zip(&trace.h_values)
        .skip(start)
        .take_while(|(r, _)| **r <= top)
        .map(|(&r, &h)| (r, h / r.powf(2.0 * g)))
        .collect();
    let vals: Vec<f64> = limit_samples.iter().map(|p| p.1).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = (vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - vals.iter().cloned().fold(f64::INFINITY, f64::min))
        / mean.abs();
    DoublingBounds {
        gamma: g,
        sigma,
        k1,
        k2,
        limit_estimate: vals.first().copied().unwrap_or(0.0),
        limit_samples,
        limit_spread: spread,
    }
}

/// Normalized angular slice w(tau .) / sqrt(H(tau)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub tau: f64,
    pub profile: Vec<f64>,
    /// Weighted angular norm of `profile` (1 up to rounding).
    pub norm: f64,
    pub distance_to_eigenspace: f64,
}

/// Rescale the field at `tau` and measure its distance to the eigenspace of
/// the classified eigenvalue.
pub fn blowup_profile(
    field: &ExtensionField,
    tau: f64,
    class: &Classification,
    spectrum: &Spectrum,
) -> Result<BlowupProfile> {
    if spectrum.mesh != field.grid.angular || spectrum.params != field.params {
        return domain("spectrum and field use different meshes or parameters");
    }
    let section = field.section(tau)?;
    let forms: &AngularForms = field.forms();
    let h = forms.mass.quad(&section);
    if !(h > 0.0) {
        return Err(Error::Integrity(format!(
            "H({tau:e}) vanishes; no blow-up profile"
        )));
    }
    let profile: Vec<f64> = section.iter().map(|v| v / h.sqrt()).collect();
    let norm = forms.mass.quad(&profile).sqrt();
    let distance = if class.ell != field.ell {
        1.0
    } else {
        let mp = forms.mass.mul(&profile);
        let captured: f64 = spectrum
            .modes
            .iter()
            .filter(|m| {
                m.ell == field.ell
                    && (m.mu - class.mu_k0).abs() <= EIGENSPACE_TOL * (1.0 + class.mu_k0.abs())
            })
            .map(|m| {
                m.profile
                    .iter()
                    .zip(&mp)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .powi(2)
            })
            .sum();
        (norm * norm - captured).max(0.0).sqrt()
    };
    Ok(BlowupProfile {
        tau,
        profile,
        norm,
        distance_to_eigenspace: distance,
    })
}

/// Result of the vanishing-order test at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VanishingOrder {
    Finite(f64),
    /// H vanishes identically or decays faster than r^{2 * 10}.
    InfiniteOrder,
}

/// Decay slope of H (in log-log) beyond which the order is flagged infinite.
pub const INFINITE_ORDER_SLOPE: f64 = 20.0;

pub fn vanishing_order(field: &ExtensionField) -> Result<VanishingOrder> {
    let grid = &field.grid;
    let start = EXCLUDED_INNER_RINGS;
    let r_lo = grid.radius(start);
    let r_hi = (r_lo * 100.0).min(grid.outer_radius());
    let (h_lo, h_hi) = (field.sphere(r_lo)?.h, field.sphere(r_hi)?.h);
    if !(h_lo > 0.0) || !(h_hi > 0.0) {
        return Ok(VanishingOrder::InfiniteOrder);
    }
    let slope = (h_hi / h_lo).ln() / (r_hi / r_lo).ln();
    if slope > INFINITE_ORDER_SLOPE {
        return Ok(VanishingOrder::InfiniteOrder);
    }
    match frequency_trace(field) {
        Ok(t) => Ok(VanishingOrder::Finite(t.gamma_hat)),
        Err(Error::Integrity(_)) => Ok(VanishingOrder::InfiniteOrder),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::HalfDiskGrid;
    use crate::sphere::AngularMesh;
    use crate::ProblemParams;

    fn setup(lambda: f64) -> (ProblemParams, HalfDiskGrid, Spectrum) {
        let params = ProblemParams::new(3, 0.5, lambda).unwrap();
        let mesh = AngularMesh::graded(96, 3.0).unwrap();
        let grid = HalfDiskGrid::new(1.0, 1e-4, 128, mesh.clone()).unwrap();
        let spectrum = Spectrum::new(&params, &mesh, 2, 3).unwrap();
        (params, grid, spectrum)
    }

    fn separable(lambda: f64, ell: u32, index: usize) -> (ExtensionField, f64, Spectrum) {
        let (params, grid, spectrum) = setup(lambda);
        let mode = spectrum.mode(ell, index).unwrap();
        let sigma = params.exponents(mode.mu).unwrap().sigma_plus;
        let field = ExtensionField::separable(params, grid, mode, sigma).unwrap();
        (field, sigma, spectrum)
    }

    #[test]
    fn separable_modes_have_constant_frequency() {
        for (ell, index) in [(0, 1), (1, 1), (0, 2), (2, 1)] {
            let (field, sigma, _) = separable(0.5, ell, index);
            let t = frequency_trace(&field).unwrap();
            assert!(t.n_stddev() <= 1e-6, "({ell},{index}): {}", t.n_stddev());
            assert!(
                (t.gamma_hat - sigma).abs() <= 1e-6,
                "{} vs {sigma}",
                t.gamma_hat
            );
            assert!(t.monotonicity_defect() <= 1e-9);
            assert!(t.above_lower_bound());
            assert!(t.estimators_agree());
            assert!(t.to_csv().starts_with("r,H,D,N\n"));
        }
    }

    #[test]
    fn zero_field_is_rejected_and_flagged() {
        let (params, grid, _) = setup(0.5);
        let field = ExtensionField::zero(params, 0, grid).unwrap();
        assert!(matches!(frequency_trace(&field), Err(Error::Integrity(_))));
        assert_eq!(
            vanishing_order(&field).unwrap(),
            VanishingOrder::InfiniteOrder
        );
    }

    #[test]
    fn vanishing_order_of_a_mode_is_its_exponent() {
        let (field, sigma, _) = separable(0.0, 1, 1);
        match vanishing_order(&field).unwrap() {
            VanishingOrder::Finite(g) => assert!((g - sigma).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classification_examples() {
        let (_, _, spectrum) = setup(0.0);
        let c0 = classify_mode(0.0, &spectrum).unwrap();
        assert_eq!((c0.k0, c0.ell), (1, 0));
        assert!(c0.mu_k0.abs() < 1e-8 && c0.confident);
        let c1 = classify_mode(1.0, &spectrum).unwrap();
        assert_eq!((c1.k0, c1.ell, c1.multiplicity), (2, 1, 3));
        assert!((c1.mu_k0 - 3.0).abs() < 1e-3 && c1.gap < 1e-3);
        let (_, _, half) = setup(0.5);
        let c = classify_mode(-0.5, &half).unwrap();
        assert_eq!(c.k0, 1);
        assert!((c.mu_hat + 0.75).abs() < 1e-12 && c.gap < 0.1);
        // Between two eigenvalues the gap grows toward one half.
        let g = -1.0 + (1.0 + 0.45 * c1.mu_k0).sqrt();
        let mid = classify_mode(g, &spectrum).unwrap();
        assert_eq!(mid.k0, 1);
        assert!(mid.gap > 0.4 && mid.gap < 0.5);
    }

    #[test]
    fn doubling_and_blowup_for_a_mode() {
        let (field, sigma, spectrum) = separable(0.5, 0, 1);
        let t = frequency_trace(&field).unwrap();
        let b = doubling_bounds(&t, 0.5);
        assert!(b.upper_holds() && b.lower_holds() && b.stabilized());
        assert!(b.limit_spread < 1e-5 && (b.limit_estimate - 1.0).abs() < 1e-5);
        let class = classify_mode(sigma, &spectrum).unwrap();
        let p = blowup_profile(&field, 1e-3, &class, &spectrum).unwrap();
        assert!((p.norm - 1.0).abs() < 1e-12);
        assert!(
            p.distance_to_eigenspace < 1e-6,
            "{}",
            p.distance_to_eigenspace
        );
        let other = classify_mode(1.0, &spectrum).unwrap();
        let q = blowup_profile(&field, 1e-3, &other, &spectrum).unwrap();
        assert_eq!(q.distance_to_eigenspace, 1.0);
    }
}
