use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

use super::grid::HalfDiskGrid;
use super::radial::hermite;
use crate::closed_forms::ProblemParams;
use crate::error::{domain, Error, Result};
use crate::quadrature::GaussRule;
use crate::sphere::{assemble_sl, multiplicity, AngularForms, AngularMode};

/// Radial potential h(x) = C_h |x|^{-2s+eps}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSpec {
    pub coefficient: f64,
    pub exponent: f64,
}

impl HSpec {
    /// |x|^{2s} h(x) = C_h |x|^eps.
    pub fn scaled(&self, r: f64) -> f64 {
        self.coefficient * r.powf(self.exponent)
    }
}

/// Power nonlinearity f(t) = c |t|^{p-2} t with primitive F(t) = c |t|^p / p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FSpec {
    pub coefficient: f64,
    pub power: f64,
}

impl FSpec {
    /// The constant C_f = c max(1, p) of the growth bounds.
    pub fn growth_constant(&self) -> f64 {
        self.coefficient.abs() * self.power.max(1.0)
    }
}

/// Power-law continuation of a field below the innermost ring:
/// W(r) = (r / r_min)^exponent * profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreTerm {
    pub exponent: f64,
    pub profile: Vec<f64>,
}

/// A field w(r, theta) = W(r, phi) Y_ell(omega) on the half ball B_R^+.
///
/// W is stored on the rings of a [`HalfDiskGrid`] through nodal values and
/// log-derivatives r dW/dr (cubic Hermite in ln r, piecewise linear in phi)
/// and continued below the innermost ring by a finite sum of powers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionField {
    pub params: ProblemParams,
    pub ell: u32,
    pub grid: HalfDiskGrid,
    pub h: Option<HSpec>,
    pub f: Option<FSpec>,
    /// values[i][j] = W(r_i, phi_j)
    pub values: Vec<Vec<f64>>,
    /// log_derivs[i][j] = r dW/dr at (r_i, phi_j)
    pub log_derivs: Vec<Vec<f64>>,
    pub core: Vec<CoreTerm>,
    #[serde(skip)]
    forms: OnceLock<Arc<AngularForms>>,
    #[serde(skip)]
    integrator: OnceLock<Arc<FieldIntegrator>>,
}

impl PartialEq for ExtensionField {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.ell == other.ell
            && self.grid == other.grid
            && self.h == other.h
            && self.f == other.f
            && self.values == other.values
            && self.log_derivs == other.log_derivs
            && self.core == other.core
    }
}

impl ExtensionField {
    pub fn new(
        params: ProblemParams,
        ell: u32,
        grid: HalfDiskGrid,
        values: Vec<Vec<f64>>,
        log_derivs: Vec<Vec<f64>>,
        core: Vec<CoreTerm>,
    ) -> Result<Self> {
        if multiplicity(params.n, ell) == 0 {
            return domain(format!("no degree-{ell} harmonics on S^{}", params.n - 1));
        }
        let (rings, nodes) = (grid.rings(), grid.angular.len());
        let shape_ok = values.len() == rings
            && log_derivs.len() == rings
            && values.iter().chain(&log_derivs).all(|r| r.len() == nodes)
            && core.iter().all(|t| t.profile.len() == nodes);
        if !shape_ok {
            return domain("field tables do not match the grid");
        }
        let finite = values
            .iter()
            .chain(&log_derivs)
            .flatten()
            .chain(core.iter().flat_map(|t| t.profile.iter()))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("field contains non-finite values".into()));
        }
        let c = params.gap();
        for a in &core {
            if !(c + 2.0 * a.exponent > 0.0) {
                return domain(format!(
                    "core exponent {} has infinite weighted energy near the origin",
                    a.exponent
                ));
            }
        }
        let mut field = Self {
            params,
            ell,
            grid,
            h: None,
            f: None,
            values,
            log_derivs,
            core,
            forms: OnceLock::new(),
            integrator: OnceLock::new(),
        };
        if ell > 0 {
            for row in field.values.iter_mut().chain(field.log_derivs.iter_mut()) {
                row[0] = 0.0;
            }
            for t in field.core.iter_mut() {
                t.profile[0] = 0.0;
            }
        }
        Ok(field)
    }

    /// Sample W and r dW/dr from closures of (r, phi); the core is the
    /// power continuation with `core_exponent` of the innermost ring.
    pub fn from_fn(
        params: ProblemParams,
        ell: u32,
        grid: HalfDiskGrid,
        w: impl Fn(f64, f64) -> f64,
        r_dw: impl Fn(f64, f64) -> f64,
        core_exponent: f64,
    ) -> Result<Self> {
        let nodes = grid.angular.nodes().to_vec();
        let radii = grid.radii();
        let values: Vec<Vec<f64>> = radii
            .iter()
            .map(|&r| nodes.iter().map(|&p| w(r, p)).collect())
            .collect();
        let log_derivs = radii
            .iter()
            .map(|&r| nodes.iter().map(|&p| r_dw(r, p)).collect())
            .collect();
        let core = vec![CoreTerm {
            exponent: core_exponent,
            profile: values[0].clone(),
        }];
        Self::new(params, ell, grid, values, log_derivs, core)
    }

    /// The separable field r^sigma P(phi) Y_ell with `mode` the angular profile.
    pub fn separable(
        params: ProblemParams,
        grid: HalfDiskGrid,
        mode: &AngularMode,
        sigma: f64,
    ) -> Result<Self> {
        Self::power_profile(params, mode.ell, grid, &mode.profile, sigma)
    }

    /// r^a P(phi) Y_ell for nodal profile `profile`.
    pub fn power_profile(
        params: ProblemParams,
        ell: u32,
        grid: HalfDiskGrid,
        profile: &[f64],
        a: f64,
    ) -> Result<Self> {
        let radii = grid.radii();
        let values: Vec<Vec<f64>> = radii
            .iter()
            .map(|&r| profile.iter().map(|p| r.powf(a) * p).collect())
            .collect();
        let log_derivs = values
            .iter()
            .map(|row| row.iter().map(|v| a * v).collect())
            .collect();
        let core = vec![CoreTerm {
            exponent: a,
            profile: values[0].clone(),
        }];
        Self::new(params, ell, grid, values, log_derivs, core)
    }

    /// The constant function w = value (degree 0).
    pub fn constant(params: ProblemParams, grid: HalfDiskGrid, value: f64) -> Result<Self> {
        let section = value * params.boundary_sphere_area().sqrt();
        let profile = vec![section; grid.angular.len()];
        Self::power_profile(params, 0, grid, &profile, 0.0)
    }

    pub fn zero(params: ProblemParams, ell: u32, grid: HalfDiskGrid) -> Result<Self> {
        let profile = vec![0.0; grid.angular.len()];
        Self::power_profile(params, ell, grid, &profile, 0.0)
    }

    /// Attach the potential and nonlinearity used by D(r) and the Pohozaev terms.
    pub fn with_perturbations(mut self, h: Option<HSpec>, f: Option<FSpec>) -> Result<Self> {
        if let Some(f) = f {
            if self.ell != 0 && f.coefficient != 0.0 {
                return domain("the power nonlinearity is only supported for degree-0 fields");
            }
        }
        self.h = h;
        self.f = f;
        self.integrator = OnceLock::new();
        Ok(self)
    }

    /// Multiply the field by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        let scale = |t: &Vec<Vec<f64>>| {
            t.iter()
                .map(|r| r.iter().map(|v| c * v).collect())
                .collect()
        };
        let mut out = self.clone();
        out.values = scale(&self.values);
        out.log_derivs = scale(&self.log_derivs);
        for t in out.core.iter_mut() {
            for v in t.profile.iter_mut() {
                *v *= c;
            }
        }
        out.integrator = OnceLock::new();
        out
    }

    pub fn forms(&self) -> &AngularForms {
        self.forms
            .get_or_init(|| Arc::new(assemble_sl(&self.params, self.ell, &self.grid.angular)))
    }

    pub(crate) fn trace_index(&self) -> usize {
        self.grid.angular.len() - 1
    }

    /// Whether every stored value vanishes.
    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|v| *v == 0.0)
            && self
                .core
                .iter()
                .flat_map(|t| t.profile.iter())
                .all(|v| *v == 0.0)
    }

    /// W and dW/du at log-radius `u` (Hermite inside the grid, powers below it).
    pub fn section_at_log(&self, u: f64) -> (Vec<f64>, Vec<f64>) {
        let u0 = self.grid.inner_radius().ln();
        let n = self.grid.angular.len();
        if u < u0 {
            let mut w = vec![0.0; n];
            let mut d = vec![0.0; n];
            for t in &self.core {
                let g = (t.exponent * (u - u0)).exp();
                for j in 0..n {
                    w[j] += g * t.profile[j];
                    d[j] += t.exponent * g * t.profile[j];
                }
            }
            return (w, d);
        }
        let (c, t) = self.grid.locate(u);
        let (v, dv) = hermite(t, self.grid.log_step());
        let rows = [
            &self.values[c],
            &self.log_derivs[c],
            &self.values[c + 1],
            &self.log_derivs[c + 1],
        ];
        let mut w = vec![0.0; n];
        let mut d = vec![0.0; n];
        for (k, row) in rows.iter().enumerate() {
            for j in 0..n {
                w[j] += v[k] * row[j];
                d[j] += dv[k] * row[j];
            }
        }
        (w, d)
    }

    /// Trace W(r, pi/2) and its u-derivative at log-radius `u`.
    pub fn trace_at_log(&self, u: f64) -> (f64, f64) {
        let j = self.trace_index();
        let u0 = self.grid.inner_radius().ln();
        if u < u0 {
            return self.core.iter().fold((0.0, 0.0), |(w, d), t| {
                let g = (t.exponent * (u - u0)).exp() * t.profile[j];
                (w + g, d + t.exponent * g)
            });
        }
        let (c, t) = self.grid.locate(u);
        let (v, dv) = hermite(t, self.grid.log_step());
        let coeffs = [
            self.values[c][j],
            self.log_derivs[c][j],
            self.values[c + 1][j],
            self.log_derivs[c + 1][j],
        ];
        let w = v.iter().zip(&coeffs).map(|(a, b)| a * b).sum();
        let d = dv.iter().zip(&coeffs).map(|(a, b)| a * b).sum();
        (w, d)
    }

    /// W(r, .) at the angular nodes.
    pub fn section(&self, r: f64) -> Result<Vec<f64>> {
        self.check_radius(r)?;
        Ok(self.section_at_log(r.ln()).0)
    }

    pub(crate) fn check_radius(&self, r: f64) -> Result<()> {
        if !self.grid.contains(r) {
            return domain(format!(
                "radius {r} outside the grid range [{}, {}]",
                self.grid.inner_radius(),
                self.grid.outer_radius()
            ));
        }
        Ok(())
    }

    /// c |S^{N-1}|^{-(p-2)/2}: the coefficient of f acting on the degree-0 section.
    pub(crate) fn section_f(&self) -> Option<(f64, f64)> {
        self.f.filter(|f| f.coefficient != 0.0).map(|f| {
            let area = self.params.boundary_sphere_area();
            (f.coefficient * area.powf(-(f.power - 2.0) / 2.0), f.power)
        })
    }

    /// Quadrature of all ball integrals with the default 8-point rule.
    pub fn integrator(&self) -> &FieldIntegrator {
        self.integrator
            .get_or_init(|| Arc::new(FieldIntegrator::new(self, GaussRule::legendre(8))))
    }

    pub fn ball(&self, r: f64) -> Result<BallIntegrals> {
        self.check_radius(r)?;
        Ok(self.integrator().ball(self, r))
    }

    pub fn sphere(&self, r: f64) -> Result<SphereIntegrals> {
        self.check_radius(r)?;
        Ok(sphere_integrals(self, r))
    }
}

/// Integrals over B_r^+ (or its flat part B_r').
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BallIntegrals {
    /// int t^{1-2s} |grad w|^2
    pub energy: f64,
    /// int t^{1-2s} (dw/d|z|)^2
    pub radial_energy: f64,
    /// int t^{1-2s} w^2 / |z|^2
    pub mass_over_r2: f64,
    /// int_{B'} w^2 / |x|^{2s}
    pub hardy_trace: f64,
    /// int_{B'} h w^2
    pub h_trace: f64,
    /// int_{B'} f(w) w
    pub f_trace: f64,
    /// int_{B'} F(w)
    pub big_f: f64,
}

impl BallIntegrals {
    fn add(&self, o: &Self) -> Self {
        Self {
            energy: self.energy + o.energy,
            radial_energy: self.radial_energy + o.radial_energy,
            mass_over_r2: self.mass_over_r2 + o.mass_over_r2,
            hardy_trace: self.hardy_trace + o.hardy_trace,
            h_trace: self.h_trace + o.h_trace,
            f_trace: self.f_trace + o.f_trace,
            big_f: self.big_f + o.big_f,
        }
    }
}

/// Integrals over the half sphere S_r^+ (or the flat sphere dB_r').
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SphereIntegrals {
    /// H(r) = int_{S^N_+} theta_1^{1-2s} w(r theta)^2
    pub h: f64,
    /// int_{S_r^+} t^{1-2s} w^2
    pub mass: f64,
    /// int_{S_r^+} t^{1-2s} |grad w|^2
    pub grad: f64,
    /// int_{S_r^+} t^{1-2s} (dw/dnu)^2
    pub normal: f64,
    /// int_{dB_r'} w^2 / |x|^{2s}
    pub hardy_trace: f64,
    /// int_{dB_r'} h w^2
    pub h_trace: f64,
    /// int_{dB_r'} F(w)
    pub big_f: f64,
}

fn sphere_integrals(field: &ExtensionField, r: f64) -> SphereIntegrals {
    let forms = field.forms();
    let u = r.ln();
    let c = field.params.gap();
    let (w, wu) = field.section_at_log(u);
    let tr = w[field.trace_index()];
    let pw = r.powf(c - 1.0);
    let h_trace = field.h.map_or(0.0, |h| h.scaled(r) * pw * tr * tr);
    let big_f = field.section_f().map_or(0.0, |(cf, p)| {
        r.powf(field.params.n as f64 - 1.0) * cf * tr.abs().powf(p) / p
    });
    let hm = forms.mass.quad(&w);
    SphereIntegrals {
        h: hm,
        mass: pw * r * r * hm,
        grad: pw * (forms.mass.quad(&wu) + forms.energy(&w)),
        normal: pw * forms.mass.quad(&wu),
        hardy_trace: pw * tr * tr,
        h_trace,
        big_f,
    }
}

/// Cumulative ball integrals at every ring for one quadrature rule.
#[derive(Debug, Clone)]
pub struct FieldIntegrator {
    rule: GaussRule,
    prefix: Vec<BallIntegrals>,
}

impl FieldIntegrator {
    pub fn new(field: &ExtensionField, rule: GaussRule) -> Self {
        let grid = &field.grid;
        let mut prefix = Vec::with_capacity(grid.rings());
        let mut acc = core_integrals(field);
        prefix.push(acc);
        for i in 0..grid.cells() {
            let cell = integrate_span(field, &rule, grid.log_radius(i), grid.log_radius(i + 1));
            acc = acc.add(&cell);
            prefix.push(acc);
        }
        Self { rule, prefix }
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    /// Ball integrals over B_r.
    pub fn ball(&self, field: &ExtensionField, r: f64) -> BallIntegrals {
        let grid = &field.grid;
        let u = r.ln();
        let (c, t) = grid.locate(u);
        if t <= 0.0 {
            return self.prefix[c];
        }
        if t >= 1.0 {
            return self.prefix[c + 1];
        }
        let partial = integrate_span(field, &self.rule, grid.log_radius(c), u);
        self.prefix[c].add(&partial)
    }

    /// Ball integrals at ring `i`.
    pub fn at_ring(&self, i: usize) -> BallIntegrals {
        self.prefix[i]
    }
}

fn integrate_span(field: &ExtensionField, rule: &GaussRule, ua: f64, ub: f64) -> BallIntegrals {
    let forms = field.forms();
    let c = field.params.gap();
    let nn = field.params.n as f64;
    let trace = field.trace_index();
    let fsec = field.section_f();
    let mut out = BallIntegrals::default();
    for (u, w) in rule.mapped(ua, ub) {
        let (wv, wu) = field.section_at_log(u);
        let ecu = w * (c * u).exp();
        let m_u = forms.mass.quad(&wu);
        let m_w = forms.mass.quad(&wv);
        let tr = wv[trace];
        out.energy += ecu * (m_u + forms.energy(&wv));
        out.radial_energy += ecu * m_u;
        out.mass_over_r2 += ecu * m_w;
        out.hardy_trace += ecu * tr * tr;
        if let Some(h) = field.h {
            out.h_trace += ecu * h.scaled(u.exp()) * tr * tr;
        }
        if let Some((cf, p)) = fsec {
            let fw = w * (nn * u).exp() * cf * tr.abs().powf(p);
            out.f_trace += fw;
            out.big_f += fw / p;
        }
    }
    out
}

/// Exact integrals of the power-law core over B_{r_min}, plus a quadrature
/// for the nonlinear terms.
fn core_integrals(field: &ExtensionField) -> BallIntegrals {
    let forms = field.forms();
    let c = field.params.gap();
    let r0 = field.grid.inner_radius();
    let scale = r0.powf(c);
    let j = field.trace_index();
    let mut out = BallIntegrals::default();
    for a in &field.core {
        for b in &field.core {
            let den = c + a.exponent + b.exponent;
            let m = forms.mass.bilinear(&a.profile, &b.profile);
            let k = forms.energy_bilinear(&a.profile, &b.profile);
            let ee = a.exponent * b.exponent;
            let tt = a.profile[j] * b.profile[j];
            out.energy += scale * (ee * m + k) / den;
            out.radial_energy += scale * ee * m / den;
            out.mass_over_r2 += scale * m / den;
            out.hardy_trace += scale * tt / den;
            if let Some(h) = field.h {
                out.h_trace += scale * h.scaled(r0) * tt / (den + h.exponent);
            }
        }
    }
    if let Some((cf, p)) = field.section_f() {
        let nn = field.params.n as f64;
        let slowest = field
            .core
            .iter()
            .filter(|t| t.profile[j] != 0.0)
            .map(|t| t.exponent)
            .fold(f64::INFINITY, f64::min);
        if slowest.is_finite() {
            let rate = nn + p * slowest;
            if rate <= 0.0 {
                out.f_trace = f64::INFINITY;
                out.big_f = f64::INFINITY;
            } else {
                let u0 = r0.ln();
                let span = 40.0 / rate;
                let rule = GaussRule::legendre(8);
                let fw = rule.integrate_composite(u0 - span, u0, 64, |u| {
                    let tr = field.trace_at_log(u).0;
                    (nn * u).exp() * cf * tr.abs().powf(p)
                });
                out.f_trace = fw;
                out.big_f = fw / p;
            }
        }
    }
    out
}
