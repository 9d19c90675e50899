//! Mode-by-mode solution path: angular projections phi_k(tau), the radial
//! forcing zeta_k, the variation-of-constants formula for the Euler ODE
//!
//!   -phi'' - (N + 1 - 2s)/tau phi' + mu_k/tau^2 phi = zeta_k,
//!
//! the asymptotic coefficients beta_i and a Picard iteration at the mode level.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::almgren::{Classification, EIGENSPACE_TOL, EXCLUDED_INNER_RINGS};
use crate::closed_forms::{ExponentPair, ProblemParams};
use crate::error::{domain, Error, Result};
use crate::field::{BoundaryDatum, CoreTerm, ExtensionField, FSpec, HSpec, HalfDiskGrid};
use crate::quadrature::GaussRule;
use crate::sphere::{AngularBasis, Spectrum};

/// phi_k(tau_i) for selected modes on the grid rings (innermost first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub radii: Vec<f64>,
    /// (ell, index within ell) of each row.
    pub modes: Vec<(u32, usize)>,
    /// coeffs[k][i] = phi_k(radii[i])
    pub coeffs: Vec<Vec<f64>>,
}

/// Project a field on the first `k` modes of `spectrum` at every ring.
/// Modes of another degree are orthogonal to the field and project to zero.
pub fn project_modes(field: &ExtensionField, spectrum: &Spectrum, k: usize) -> Result<ModeTable> {
    if k > spectrum.modes.len() {
        return domain(format!(
            "{k} modes requested but the spectrum holds {}",
            spectrum.modes.len()
        ));
    }
    if spectrum.mesh != field.grid.angular {
        return domain("spectrum and field use different angular meshes");
    }
    let mass = &field.forms().mass;
    let weighted: Vec<Vec<f64>> = field.values.iter().map(|row| mass.mul(row)).collect();
    let mut coeffs = Vec::with_capacity(k);
    let mut modes = Vec::with_capacity(k);
    for m in &spectrum.modes[..k] {
        modes.push((m.ell, m.index_within_ell));
        let row = if m.ell == field.ell {
            weighted
                .iter()
                .map(|mw| mw.iter().zip(&m.profile).map(|(a, b)| a * b).sum())
                .collect()
        } else {
            vec![0.0; weighted.len()]
        };
        coeffs.push(row);
    }
    Ok(ModeTable {
        radii: field.grid.radii(),
        modes,
        coeffs,
    })
}

/// Largest relative excess of sum_k phi_k^2 over H (positive means Parseval fails).
pub fn parseval_defect(table: &ModeTable, h_values: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (i, &h) in h_values.iter().enumerate() {
        let sum: f64 = table.coeffs.iter().map(|c| c[i] * c[i]).sum();
        worst = worst.max((sum - h) / h.max(f64::MIN_POSITIVE));
    }
    worst
}

/// zeta_k(tau) = kappa tau^{2s-2} p_k (h(tau) W_tr(tau) + f_sec(W_tr(tau))),
/// the forcing of an axisymmetric trace on one mode with trace value p_k.
pub fn zeta_k(
    params: &ProblemParams,
    radii: &[f64],
    trace: &[f64],
    trace_value: f64,
    h: Option<HSpec>,
    f: Option<FSpec>,
) -> Vec<f64> {
    let kappa = params.kappa();
    let s = params.s;
    let cf = f.map(|f| {
        let area = params.boundary_sphere_area();
        (f.coefficient * area.powf(-(f.power - 2.0) / 2.0), f.power)
    });
    radii
        .iter()
        .zip(trace)
        .map(|(&t, &w)| {
            if trace_value == 0.0 {
                return 0.0;
            }
            let mut g = 0.0;
            if let Some(h) = h {
                g += h.coefficient * t.powf(h.exponent - 2.0 * s) * w;
            }
            if let Some((c, p)) = cf {
                g += c * w.abs().powf(p - 2.0) * w;
            }
            kappa * t.powf(2.0 * s - 2.0) * trace_value * g
        })
        .collect()
}

/// int_0^L e^{x + k v} dv without overflow in the intermediate terms.
fn exp_integral(x: f64, k: f64, len: f64) -> f64 {
    let kl = k * len;
    if kl.abs() < 1e-8 {
        (x).exp() * len * (1.0 + 0.5 * kl)
    } else if k > 0.0 {
        (x + kl).exp() * (-(-kl).exp_m1()) / k
    } else {
        x.exp() * (-kl.exp_m1()) / (-k)
    }
}

/// int_0^L v e^{x + k v} dv.
fn exp_integral_v(x: f64, k: f64, len: f64) -> f64 {
    let kl = k * len;
    if kl.abs() < 1e-2 {
        // Series in k L.
        let mut term = len * len / 2.0;
        let mut sum = term;
        for n in 1..12 {
            term *= kl * (n as f64 + 1.0) / ((n as f64) * (n as f64 + 2.0));
            sum += term;
        }
        x.exp() * sum
    } else {
        (len * (x + kl).exp() - exp_integral(x, k, len)) / k
    }
}

/// zeta on one cell [a, a e^h] in v = ln(t/a).
#[derive(Debug, Clone, Copy, PartialEq)]
enum CellModel {
    /// zeta_a e^{q v}
    Power { za: f64, q: f64 },
    /// za + slope v
    Linear { za: f64, slope: f64 },
}

impl CellModel {
    fn fit(za: f64, zb: f64, h: f64) -> Self {
        if za != 0.0 && zb != 0.0 && za.signum() == zb.signum() {
            CellModel::Power {
                za,
                q: (zb / za).ln() / h,
            }
        } else {
            CellModel::Linear {
                za,
                slope: (zb - za) / h,
            }
        }
    }

    /// int_{a e^{v0}}^{a e^{v1}} (x/t)^sigma t zeta(t) dt with ln(x/a) = w.
    fn moment(&self, a: f64, w: f64, sigma: f64, v0: f64, v1: f64) -> f64 {
        let len = v1 - v0;
        if len <= 0.0 {
            return 0.0;
        }
        let base = 2.0 * a.ln() + sigma * w;
        match *self {
            CellModel::Power { za, q } => {
                let k = 2.0 - sigma + q;
                za * exp_integral(base + k * v0, k, len)
            }
            CellModel::Linear { za, slope } => {
                let k = 2.0 - sigma;
                let alpha = za + slope * v0;
                alpha * exp_integral(base + k * v0, k, len)
                    + slope * exp_integral_v(base + k * v0, k, len)
            }
        }
    }

    fn value(&self, v: f64) -> f64 {
        match *self {
            CellModel::Power { za, q } => za * (q * v).exp(),
            CellModel::Linear { za, slope } => za + slope * v,
        }
    }
}

/// One radial coefficient from the variation-of-constants formula with the
/// finite-energy choice of c_2 and c_1 fixed by phi(R).
#[derive(Debug, Clone, PartialEq)]
pub struct VocSolution {
    pub exponents: ExponentPair,
    pub radii: Vec<f64>,
    pub zeta: Vec<f64>,
    pub boundary_value: f64,
    cells: Vec<CellModel>,
    /// tau^{sigma+} int_tau^R t^{1-sigma+} zeta / (sigma+ - sigma-) at rings.
    plus: Vec<f64>,
    /// tau^{sigma-} int_0^tau t^{1-sigma-} zeta / (sigma+ - sigma-) at rings.
    minus: Vec<f64>,
    gap: f64,
}

/// Solve the mode ODE on the rings `radii` (innermost first, geometric)
/// with forcing samples `zeta` and phi(R) = `boundary_value`.
pub fn variation_of_constants(
    zeta: &[f64],
    radii: &[f64],
    boundary_value: f64,
    exponents: ExponentPair,
) -> Result<VocSolution> {
    let n = radii.len();
    if n < 3 || zeta.len() != n {
        return domain("need matching forcing samples on at least three rings");
    }
    let gap = exponents.gap();
    if !(gap > 0.0) {
        return domain("variation of constants needs sigma+ > sigma-");
    }
    let (sp, sm) = (exponents.sigma_plus, exponents.sigma_minus);
    let cells: Vec<CellModel> = (0..n - 1)
        .map(|i| CellModel::fit(zeta[i], zeta[i + 1], (radii[i + 1] / radii[i]).ln()))
        .collect();
    // Power continuation of zeta below the first ring.
    let core = match cells[0] {
        CellModel::Power { za, q } => (za, q),
        CellModel::Linear { za, .. } => (za, 0.0),
    };
    let mut minus = vec![0.0; n];
    if core.0 != 0.0 {
        let k = 2.0 + core.1 - sm;
        if !(k > 0.0) {
            return domain(format!(
                "forcing ~ t^{:.4} is not integrable against t^(1 - sigma-) at the origin",
                core.1
            ));
        }
        minus[0] = core.0 * radii[0] * radii[0] / k / gap;
    }
    for i in 0..n - 1 {
        let (a, b) = (radii[i], radii[i + 1]);
        let h = (b / a).ln();
        minus[i + 1] = (b / a).powf(sm) * minus[i] + cells[i].moment(a, h, sm, 0.0, h) / gap;
    }
    let mut plus = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let (a, b) = (radii[i], radii[i + 1]);
        let h = (b / a).ln();
        plus[i] = (a / b).powf(sp) * plus[i + 1] + cells[i].moment(a, 0.0, sp, 0.0, h) / gap;
    }
    let total = plus.iter().chain(&minus).all(|v| v.is_finite());
    if !total {
        return Err(Error::Numeric(
            "variation-of-constants integrals overflowed".into(),
        ));
    }
    Ok(VocSolution {
        exponents,
        radii: radii.to_vec(),
        zeta: zeta.to_vec(),
        boundary_value,
        cells,
        plus,
        minus,
        gap,
    })
}

impl VocSolution {
    fn outer(&self) -> f64 {
        *self.radii.last().expect("nonempty")
    }

    /// The homogeneous amplitude R^{sigma+} c_1.
    fn homogeneous(&self) -> f64 {
        self.boundary_value - self.minus[self.minus.len() - 1]
    }

    fn locate(&self, tau: f64) -> usize {
        let i = self.radii.partition_point(|&r| r <= tau);
        i.clamp(1, self.radii.len() - 1) - 1
    }

    /// (plus, minus) branch integrals at an arbitrary radius inside the rings.
    fn branches(&self, tau: f64) -> (f64, f64) {
        let (sp, sm) = (self.exponents.sigma_plus, self.exponents.sigma_minus);
        let i = self.locate(tau);
        let (a, b) = (self.radii[i], self.radii[i + 1]);
        let (v, h) = ((tau / a).ln(), (b / a).ln());
        let cell = &self.cells[i];
        let plus = (tau / b).powf(sp) * self.plus[i + 1] + cell.moment(a, v, sp, v, h) / self.gap;
        let minus = (tau / a).powf(sm) * self.minus[i] + cell.moment(a, v, sm, 0.0, v) / self.gap;
        (plus, minus)
    }

    /// phi(tau) for r_min <= tau <= R.
    pub fn value(&self, tau: f64) -> f64 {
        let (p, m) = self.branches(tau);
        (tau / self.outer()).powf(self.exponents.sigma_plus) * self.homogeneous() + p + m
    }

    /// tau phi'(tau), exact for the piecewise forcing model.
    pub fn tau_derivative(&self, tau: f64) -> f64 {
        let (sp, sm) = (self.exponents.sigma_plus, self.exponents.sigma_minus);
        let (p, m) = self.branches(tau);
        sp * ((tau / self.outer()).powf(sp) * self.homogeneous() + p) + sm * m
    }

    /// phi on the rings.
    pub fn values(&self) -> Vec<f64> {
        let h = self.homogeneous();
        let r = self.outer();
        (0..self.radii.len())
            .map(|i| {
                (self.radii[i] / r).powf(self.exponents.sigma_plus) * h
                    + self.plus[i]
                    + self.minus[i]
            })
            .collect()
    }

    /// tau phi' on the rings.
    pub fn tau_derivatives(&self) -> Vec<f64> {
        let (sp, sm) = (self.exponents.sigma_plus, self.exponents.sigma_minus);
        let h = self.homogeneous();
        let r = self.outer();
        (0..self.radii.len())
            .map(|i| sp * ((self.radii[i] / r).powf(sp) * h + self.plus[i]) + sm * self.minus[i])
            .collect()
    }

    /// The sigma- branch tau^{sigma-} int_0^tau ... at the rings.
    pub fn minus_branch(&self) -> &[f64] {
        &self.minus
    }

    /// Forcing model value at tau.
    pub fn zeta_at(&self, tau: f64) -> f64 {
        let i = self.locate(tau);
        self.cells[i].value((tau / self.radii[i]).ln())
    }

    /// Relative residual of the ODE at the midpoint (in ln tau) of every
    /// interior cell, from a five-point difference of the evaluated solution.
    pub fn ode_residual(&self) -> f64 {
        let mu = self.exponents.mu;
        let c = -(self.exponents.sigma_plus + self.exponents.sigma_minus);
        let mut worst = 0.0f64;
        for i in 1..self.radii.len() - 2 {
            let u = 0.5 * (self.radii[i].ln() + self.radii[i + 1].ln());
            let stiff = self
                .exponents
                .sigma_plus
                .abs()
                .max(self.exponents.sigma_minus.abs());
            let h = (0.02 * (self.radii[i + 1] / self.radii[i]).ln()).min(0.01 / stiff.max(1.0));
            let f = |k: f64| self.value((u + k * h).exp());
            let (fm2, fm1, f0, fp1, fp2) = (f(-2.0), f(-1.0), f(0.0), f(1.0), f(2.0));
            let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
            let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
            let tau = u.exp();
            // In u = ln tau the equation reads -(phi_uu + c phi_u) + mu phi = tau^2 zeta.
            let src = tau * tau * self.zeta_at(tau);
            let res = -(d2 + c * d1) + mu * f0 - src;
            let scale = d2.abs() + (c * d1).abs() + (mu * f0).abs() + src.abs();
            // Values deep in the subnormal range carry no relative precision.
            if scale > 1e-250 {
                worst = worst.max(res.abs() / scale);
            }
        }
        worst
    }
}

/// The beta coefficients of one eigenspace member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub ell: u32,
    pub index_within_ell: usize,
    /// R^{-gamma} phi_i(R)
    pub boundary_term: f64,
    /// The integral correction from h and f.
    pub correction: f64,
    pub formula: f64,
    /// Limit of tau^{-gamma} phi_i(tau) fitted as beta + b tau^{delta}.
    pub direct: f64,
}

impl BetaEntry {
    pub fn relative_disagreement(&self) -> f64 {
        (self.formula - self.direct).abs() / self.direct.abs().max(1.0)
    }
}

/// beta_i for every member of the classified eigenspace in the field's degree.
pub fn beta_coefficients(
    field: &ExtensionField,
    spectrum: &Spectrum,
    class: &Classification,
    radius: f64,
) -> Result<Vec<BetaEntry>> {
    field.check_radius(radius)?;
    let params = &field.params;
    let gamma = params.exponents(class.mu_k0)?.sigma_plus;
    let c = params.gap();
    let den = 2.0 * gamma + c;
    if !(den > 0.0) {
        return domain("2 gamma + N - 2s must be positive");
    }
    let members: Vec<_> = spectrum
        .modes
        .iter()
        .filter(|m| {
            m.ell == field.ell
                && (m.mu - class.mu_k0).abs() <= EIGENSPACE_TOL * (1.0 + class.mu_k0.abs())
        })
        .collect();
    let mass = &field.forms().mass;
    let delta = correction_rate(field, gamma);
    let grid = &field.grid;
    let mut out = Vec::new();
    for m in members {
        let project = |r: f64| -> Result<f64> {
            let sec = field.section(r)?;
            Ok(mass.bilinear(&sec, &m.profile))
        };
        let boundary_term = radius.powf(-gamma) * project(radius)?;
        let correction = beta_correction(field, m.trace_value, gamma, radius)? / den;
        let start = EXCLUDED_INNER_RINGS;
        let top = grid.radius(start) * 10f64.powf(1.5);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in start..grid.rings() {
            let r = grid.radius(i);
            if r > top * (1.0 + 1e-12) {
                break;
            }
            xs.push(r.powf(delta));
            ys.push(
                r.powf(-gamma)
                    * field.values[i]
                        .iter()
                        .zip(&mass.mul(&m.profile))
                        .map(|(a, b)| a * b)
                        .sum::<f64>(),
            );
        }
        let direct = intercept(&xs, &ys);
        out.push(BetaEntry {
            ell: m.ell,
            index_within_ell: m.index_within_ell,
            boundary_term,
            correction,
            formula: boundary_term + correction,
            direct,
        });
    }
    if out.iter().all(|b| b.formula.abs() < 1e-10) {
        return Err(Error::Integrity(
            "all beta coefficients of the classified eigenspace vanish".into(),
        ));
    }
    Ok(out)
}

/// delta~ = min(eps, 2s + (p - 2) gamma) over the perturbations present; 1
/// when there are none (the limit is then attained exactly).
fn correction_rate(field: &ExtensionField, gamma: f64) -> f64 {
    let mut d = f64::INFINITY;
    if let Some(h) = field.h.filter(|h| h.coefficient != 0.0) {
        d = d.min(h.exponent);
    }
    if let Some(f) = field.f.filter(|f| f.coefficient != 0.0) {
        d = d.min(2.0 * field.params.s + (f.power - 2.0) * gamma);
    }
    if d.is_finite() {
        d
    } else {
        1.0
    }
}

fn intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return my;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    my - sxy / sxx * mx
}

/// int_0^R zeta_i(t) (t^{1-gamma} - t^{gamma+c+1} / R^{2 gamma + c}) dt
/// with zeta_i built from the field's trace.
fn beta_correction(
    field: &ExtensionField,
    trace_value: f64,
    gamma: f64,
    radius: f64,
) -> Result<f64> {
    let params = &field.params;
    let h = field.h.filter(|h| h.coefficient != 0.0);
    let f = field.f.filter(|f| f.coefficient != 0.0);
    if (h.is_none() && f.is_none()) || trace_value == 0.0 {
        return Ok(0.0);
    }
    let c = params.gap();
    let s = params.s;
    let kappa = params.kappa();
    let scale_r = radius.powf(2.0 * gamma + c);
    let fsec = f.map(|f| {
        let area = params.boundary_sphere_area();
        (f.coefficient * area.powf(-(f.power - 2.0) / 2.0), f.power)
    });
    // In u = ln t: zeta(t) t dt = kappa p e^{2s u} g(W_tr) du.
    let integrand = |u: f64| -> f64 {
        let t = u.exp();
        let w = field.trace_at_log(u).0;
        let mut g = 0.0;
        if let Some(h) = h {
            g += h.coefficient * t.powf(h.exponent - 2.0 * s) * w;
        }
        if let Some((cf, p)) = fsec {
            g += cf * w.abs().powf(p - 2.0) * w;
        }
        let kernel = t.powf(-gamma) - t.powf(gamma + c) / scale_r;
        kappa * trace_value * t.powf(2.0 * s) * g * kernel
    };
    let grid = &field.grid;
    let rule = GaussRule::legendre(8);
    let u_end = radius.ln();
    let mut total = 0.0;
    for i in 0..grid.cells() {
        let (a, b) = (grid.log_radius(i), grid.log_radius(i + 1).min(u_end));
        if b <= a {
            break;
        }
        total += rule.integrate(a, b, integrand);
    }
    // Below r_min the trace is a sum of powers a_l (t/r0)^{e_l}.
    let u0 = grid.inner_radius().ln();
    let j = field.trace_index();
    let terms: Vec<&CoreTerm> = field.core.iter().filter(|t| t.profile[j] != 0.0).collect();
    if !terms.is_empty() {
        let biggest = terms.iter().map(|t| t.profile[j].abs()).fold(0.0, f64::max);
        let mut slowest = f64::INFINITY;
        for t in &terms {
            if t.profile[j].abs() > 1e-12 * biggest {
                slowest = slowest.min(t.exponent);
            }
        }
        let mut rate = f64::INFINITY;
        if let Some(h) = h {
            rate = rate.min(h.exponent + slowest - gamma);
        }
        if let Some((_, p)) = fsec {
            rate = rate.min(2.0 * s + (p - 1.0) * slowest - gamma);
        }
        if !(rate > 0.0) {
            return domain(format!(
                "the correction integral diverges at the origin (rate {rate:.4})"
            ));
        }
        let span = (40.0 / rate).min(2000.0);
        total += rule.integrate_composite(u0 - span, u0, 256, integrand);
    }
    Ok(total)
}

/// Mode-level solution of the extension problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeExpansion {
    pub params: ProblemParams,
    pub ell: u32,
    pub h: Option<HSpec>,
    pub f: Option<FSpec>,
    pub radii: Vec<f64>,
    pub mus: Vec<f64>,
    pub trace_values: Vec<f64>,
    /// phi[k][i]
    pub coeffs: Vec<Vec<f64>>,
    /// tau phi_k'(tau) at the rings.
    pub tau_derivs: Vec<Vec<f64>>,
    /// zeta[k][i]
    pub forcing: Vec<Vec<f64>>,
    /// Largest ODE residual over all modes.
    pub ode_residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    /// Filled in by the caller after classification.
    pub betas: Vec<BetaEntry>,
}

impl ModeExpansion {
    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    /// Rebuild the field on `grid` (which must carry the same rings) from the
    /// mode coefficients and the angular basis vectors.
    pub fn reconstruct(&self, grid: &HalfDiskGrid, basis: &AngularBasis) -> Result<ExtensionField> {
        let rings = grid.rings();
        if rings != self.radii.len() {
            return domain("grid does not match the expansion radii");
        }
        let nodes = grid.angular.len();
        let mut values = vec![vec![0.0; nodes]; rings];
        let mut log_derivs = vec![vec![0.0; nodes]; rings];
        let mut core = Vec::new();
        for (k, psi) in basis.vectors.iter().take(self.truncation()).enumerate() {
            for i in 0..rings {
                for j in 0..nodes {
                    values[i][j] += self.coeffs[k][i] * psi[j];
                    log_derivs[i][j] += self.tau_derivs[k][i] * psi[j];
                }
            }
            let a = self.coeffs[k][0];
            if a != 0.0 {
                core.push(CoreTerm {
                    exponent: self.params.exponents(self.mus[k])?.sigma_plus,
                    profile: psi.iter().map(|p| a * p).collect(),
                });
            }
        }
        ExtensionField::new(
            self.params,
            self.ell,
            grid.clone(),
            values,
            log_derivs,
            core,
        )?
        .with_perturbations(self.h, self.f)
    }

    /// CSV rows tau, k, phi_k, zeta_k.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,k,phi_k,zeta_k\n");
        for k in 0..self.truncation() {
            for i in 0..self.radii.len() {
                let _ = writeln!(
                    s,
                    "{:.17e},{},{:.17e},{:.17e}",
                    self.radii[i],
                    k + 1,
                    self.coeffs[k][i],
                    self.forcing[k][i]
                );
            }
        }
        s
    }
}

const MODE_PICARD_MAX: usize = 200;

/// Solve the extension problem mode by mode: iterate trace -> zeta_k ->
/// variation of constants -> trace until the coefficients settle within
/// `tol` (relative, weighted L2). `k` limits the number of modes (default:
/// the complete discrete basis of the degree).
pub fn picard_semilinear_modes(
    params: ProblemParams,
    grid: &HalfDiskGrid,
    g: &BoundaryDatum,
    h: Option<HSpec>,
    f: Option<FSpec>,
    k: Option<usize>,
    tol: f64,
) -> Result<(ModeExpansion, AngularBasis)> {
    if let Some(f) = f {
        if f.coefficient != 0.0 && g.ell != 0 {
            return domain("the power nonlinearity is only supported for degree-0 data");
        }
        if !(f.power > 2.0 && f.power <= params.critical_exponent() + 1e-12) {
            return domain(format!(
                "nonlinearity power must lie in (2, 2*(s)], got {}",
                f.power
            ));
        }
    }
    if let Some(h) = h {
        if !(h.exponent > 0.0) {
            return domain("potential exponent eps must be positive");
        }
        let load = params.lambda + h.coefficient.abs() * grid.outer_radius().powf(h.exponent);
        if load >= params.hardy_constant() {
            return domain("coercivity violated: lambda + sup|x|^(2s)|h| >= Lambda");
        }
    }
    let full = AngularBasis::full(&params, &grid.angular, g.ell)?;
    let kk = k.unwrap_or(full.len());
    if kk == 0 || kk > full.len() {
        return domain(format!("truncation {kk} outside 1..={}", full.len()));
    }
    let basis = AngularBasis {
        forms: full.forms.clone(),
        values: full.values[..kk].to_vec(),
        vectors: full.vectors[..kk].to_vec(),
    };
    let boundary = basis.coefficients(&g.values);
    let trace_values = basis.trace_values();
    let exps: Vec<ExponentPair> = basis
        .values
        .iter()
        .map(|&mu| params.exponents(mu))
        .collect::<Result<_>>()?;
    let radii = grid.radii();
    let n = radii.len();
    let c = params.gap();
    let weights: Vec<f64> = radii.iter().map(|r| r.powf(c + 2.0)).collect();
    let norm = |phi: &[Vec<f64>]| -> f64 {
        phi.iter()
            .map(|row| {
                row.iter()
                    .zip(&weights)
                    .map(|(p, w)| w * p * p)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    };
    let active = h.is_some_and(|h| h.coefficient != 0.0) || f.is_some_and(|f| f.coefficient != 0.0);
    let mut forcing = vec![vec![0.0; n]; kk];
    let solve_all = |forcing: &[Vec<f64>]| -> Result<Vec<VocSolution>> {
        (0..kk)
            .map(|m| variation_of_constants(&forcing[m], &radii, boundary[m], exps[m]))
            .collect()
    };
    let mut sols = solve_all(&forcing)?;
    let mut phi: Vec<Vec<f64>> = sols.iter().map(VocSolution::values).collect();
    let mut history = Vec::new();
    let mut iterations = 1;
    let mut omega = 1.0;
    if active {
        loop {
            let trace: Vec<f64> = (0..n)
                .map(|i| (0..kk).map(|m| trace_values[m] * phi[m][i]).sum())
                .collect();
            let new_forcing: Vec<Vec<f64>> = (0..kk)
                .map(|m| zeta_k(&params, &radii, &trace, trace_values[m], h, f))
                .collect();
            let next_sols = solve_all(&new_forcing)?;
            let next: Vec<Vec<f64>> = next_sols.iter().map(VocSolution::values).collect();
            let diff: Vec<Vec<f64>> = next
                .iter()
                .zip(&phi)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            let change = norm(&diff) / norm(&next).max(f64::MIN_POSITIVE);
            if history.last().is_some_and(|&p| change > p) {
                omega = (omega * 0.5f64).max(1.0 / 64.0);
            }
            history.push(change);
            iterations += 1;
            if change <= tol {
                phi = next;
                sols = next_sols;
                forcing = new_forcing;
                break;
            }
            if iterations > MODE_PICARD_MAX {
                return Err(Error::Convergence {
                    iterations,
                    residual: change,
                });
            }
            // Damped update; the forcing is rebuilt from the new trace next sweep.
            for (p, d) in phi.iter_mut().zip(&diff) {
                for (x, y) in p.iter_mut().zip(d) {
                    *x += omega * y;
                }
            }
        }
    } else {
        history.push(0.0);
    }
    let tau_derivs = sols.iter().map(VocSolution::tau_derivatives).collect();
    let ode_residual = sols
        .iter()
        .map(VocSolution::ode_residual)
        .fold(0.0, f64::max);
    Ok((
        ModeExpansion {
            params,
            ell: g.ell,
            h,
            f,
            radii,
            mus: basis.values.clone(),
            trace_values,
            coeffs: phi,
            tau_derivs,
            forcing,
            ode_residual,
            iterations,
            history,
            betas: Vec::new(),
        },
        basis,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::classify_mode;
    use crate::field::{solve_linear, weighted_l2_distance};
    use crate::sphere::AngularMesh;

    fn geometric(r_min: f64, cells: usize) -> Vec<f64> {
        (0..=cells)
            .map(|i| r_min.powf(1.0 - i as f64 / cells as f64))
            .collect()
    }

    #[test]
    fn homogeneous_solution_is_the_plus_power() {
        let params = ProblemParams::new(3, 0.5, 0.5).unwrap();
        let exps = params.exponents(-0.75).unwrap();
        let radii = geometric(1e-4, 40);
        let sol = variation_of_constants(&vec![0.0; 41], &radii, 2.0, exps).unwrap();
        for (r, v) in radii.iter().zip(sol.values()) {
            assert!((v - 2.0 * r.powf(-0.5)).abs() <= 1e-12 * v.abs());
        }
        assert!(sol.ode_residual() < 1e-6);
    }

    #[test]
    fn power_forcing_matches_closed_form() {
        let params = ProblemParams::new(3, 0.5, 0.5).unwrap();
        let c = params.gap();
        let mu = -0.75;
        let exps = params.exponents(mu).unwrap();
        let q = -0.5;
        // -phi'' - (c + 1)/tau phi' + mu/tau^2 phi = t^q has the particular
        // solution -t^{q+2}/((q+2)(q+2+c) - mu).
        let k = (q + 2.0) * (q + 2.0 + c) - mu;
        let exact = |t: f64| (1.0 + 1.0 / k) * t.powf(exps.sigma_plus) - t.powf(q + 2.0) / k;
        let radii = geometric(1e-4, 60);
        let zeta: Vec<f64> = radii.iter().map(|t| t.powf(q)).collect();
        let sol = variation_of_constants(&zeta, &radii, 1.0, exps).unwrap();
        for (&r, v) in radii.iter().zip(sol.values()) {
            assert!(
                (v - exact(r)).abs() <= 1e-10 * exact(r).abs(),
                "{r}: {v} vs {}",
                exact(r)
            );
        }
        let t = 0.0123;
        assert!((sol.value(t) - exact(t)).abs() <= 1e-10 * exact(t).abs());
        let d = (exps.sigma_plus * (1.0 + 1.0 / k) * t.powf(exps.sigma_plus)
            - (q + 2.0) * t.powf(q + 2.0) / k)
            * 1.0;
        assert!((sol.tau_derivative(t) - d).abs() <= 1e-9 * d.abs());
        assert!(sol.ode_residual() < 1e-6, "{}", sol.ode_residual());
    }

    #[test]
    fn nonintegrable_forcing_is_rejected() {
        let params = ProblemParams::new(3, 0.5, 0.5).unwrap();
        let exps = params.exponents(-0.75).unwrap();
        let radii = geometric(1e-4, 20);
        let zeta: Vec<f64> = radii.iter().map(|t| t.powf(-4.0)).collect();
        assert!(variation_of_constants(&zeta, &radii, 1.0, exps).is_err());
        assert!(variation_of_constants(&[0.0, 0.0], &radii[..2], 1.0, exps).is_err());
    }

    fn mode_case() -> (ProblemParams, HalfDiskGrid, Spectrum) {
        let params = ProblemParams::new(3, 0.5, 0.5).unwrap();
        let mesh = AngularMesh::graded(64, 3.0).unwrap();
        let grid = HalfDiskGrid::new(1.0, 1e-4, 96, mesh.clone()).unwrap();
        let spectrum = Spectrum::new(&params, &mesh, 1, 4).unwrap();
        (params, grid, spectrum)
    }

    #[test]
    fn projections_of_a_separable_mode() {
        let (params, grid, spectrum) = mode_case();
        let mode = spectrum.mode(0, 2).unwrap();
        let sigma = params.exponents(mode.mu).unwrap().sigma_plus;
        let field = ExtensionField::separable(params, grid.clone(), mode, sigma).unwrap();
        let table = project_modes(&field, &spectrum, 6).unwrap();
        let own = table.modes.iter().position(|&m| m == (0, 2)).unwrap();
        for (k, row) in table.coeffs.iter().enumerate() {
            for (r, v) in table.radii.iter().zip(row) {
                let expect = if k == own { r.powf(sigma) } else { 0.0 };
                assert!(
                    (v - expect).abs() <= 1e-10 * r.powf(sigma),
                    "mode {k} at {r}"
                );
            }
        }
        let h: Vec<f64> = table.radii.iter().map(|r| r.powf(2.0 * sigma)).collect();
        assert!(parseval_defect(&table, &h).abs() < 1e-9);
        assert!(project_modes(&field, &spectrum, 99).is_err());
    }

    #[test]
    fn beta_of_a_pure_mode_is_its_amplitude() {
        let (params, grid, spectrum) = mode_case();
        let mode = spectrum.mode(0, 1).unwrap();
        let sigma = params.exponents(mode.mu).unwrap().sigma_plus;
        let field = ExtensionField::separable(params, grid, mode, sigma)
            .unwrap()
            .scaled(3.0);
        let class = classify_mode(sigma, &spectrum).unwrap();
        let betas = beta_coefficients(&field, &spectrum, &class, 1.0).unwrap();
        assert_eq!(betas.len(), 1);
        let b = &betas[0];
        assert!((b.formula - 3.0).abs() < 1e-10 && b.correction == 0.0);
        assert!(b.relative_disagreement() < 1e-8, "{b:?}");
    }

    #[test]
    fn linear_mode_path_reproduces_the_field_solver() {
        let (params, grid, _) = mode_case();
        let mesh = &grid.angular;
        let g = BoundaryDatum::new(0, mesh.sample(|p| 1.0 + p.cos())).unwrap();
        let (exp, basis) =
            picard_semilinear_modes(params, &grid, &g, None, None, None, 1e-10).unwrap();
        assert_eq!(exp.iterations, 1);
        assert!(exp.ode_residual < 1e-6);
        let rebuilt = exp.reconstruct(&grid, &basis).unwrap();
        let (fe, _) = solve_linear(params, &grid, &g, None).unwrap();
        let d = weighted_l2_distance(&rebuilt, &fe).unwrap();
        assert!(d < 1e-3, "{d}");
        let csv = exp.to_csv();
        assert!(csv.starts_with("tau,k,phi_k,zeta_k\n"));
        assert_eq!(csv.lines().count(), 1 + exp.truncation() * grid.rings());
    }

    #[test]
    fn mode_path_validates_inputs() {
        let (params, grid, _) = mode_case();
        let g = BoundaryDatum::zero(0, grid.angular.len());
        let f = FSpec {
            coefficient: 0.1,
            power: 5.0,
        };
        assert!(picard_semilinear_modes(params, &grid, &g, None, Some(f), None, 1e-10).is_err());
        let h = HSpec {
            coefficient: 5.0,
            exponent: 0.5,
        };
        assert!(picard_semilinear_modes(params, &grid, &g, Some(h), None, None, 1e-10).is_err());
        assert!(picard_semilinear_modes(params, &grid, &g, None, None, Some(0), 1e-10).is_err());
    }
}
