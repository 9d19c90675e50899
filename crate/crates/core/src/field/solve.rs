use serde::{Deserialize, Serialize};

use super::extension::{CoreTerm, ExtensionField, FSpec, HSpec};
use super::grid::HalfDiskGrid;
use super::radial::{assemble, hermite, Banded, BandedCholesky};
use crate::closed_forms::ProblemParams;
use crate::error::{domain, Error, Result};
use crate::quadrature::GaussRule;
use crate::sphere::AngularBasis;

/// Dirichlet data W(R, phi) on the outer arc for one degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDatum {
    pub ell: u32,
    /// Values at the angular nodes.
    pub values: Vec<f64>,
}

impl BoundaryDatum {
    pub fn new(ell: u32, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return domain("boundary datum contains non-finite values");
        }
        Ok(Self { ell, values })
    }

    pub fn zero(ell: u32, nodes: usize) -> Self {
        Self {
            ell,
            values: vec![0.0; nodes],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            ell: self.ell,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Diagnostics of one linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    /// Componentwise backward error of the discrete weak form.
    pub weak_residual: f64,
    /// Conjugate-gradient iterations spent on the potential coupling (0 without h).
    pub cg_iterations: usize,
    /// 1 - (lambda + sup |x|^{2s}|h|) / Lambda.
    pub coercivity_margin: f64,
}

/// Diagnostics of the Picard iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// Relative weighted L2 change of each sweep.
    pub history: Vec<f64>,
    /// (lambda + sup|x|^{2s}|h| + C_f sup |x|^{2s}|w_0|^{p-2}) / Lambda on the first iterate.
    pub smallness: f64,
    pub last: LinearReport,
}

const WEAK_RESIDUAL_TOL: f64 = 1e-10;
const CG_TOL: f64 = 1e-14;
const CG_MAX: usize = 500;
const PICARD_TOL: f64 = 1e-10;
const PICARD_MAX: usize = 200;

/// Solver for the extension problem on B_R^+ for one degree `ell`.
///
/// The section W(u, phi), u = ln r, is expanded in the complete discrete
/// angular eigenbasis; each coefficient is a cubic Hermite function of u.
/// Below r_min every coefficient continues as r^{sigma+_k}, which closes the
/// inner boundary with its exact Dirichlet-to-Neumann (Robin) condition.
#[derive(Debug, Clone)]
pub struct ExtensionSolver {
    params: ProblemParams,
    grid: HalfDiskGrid,
    h: Option<HSpec>,
    basis: AngularBasis,
    trace: Vec<f64>,
    sigma: Vec<f64>,
    systems: Vec<Banded>,
    factors: Vec<BandedCholesky>,
    /// e^{(c+eps)u} C_h pairing, absent without h.
    coupling: Option<Banded>,
    /// e^{(c+2)u} pairing for the weighted L2 norm.
    volume: Banded,
    rule: GaussRule,
    coercivity_margin: f64,
}

impl ExtensionSolver {
    pub fn new(
        params: ProblemParams,
        grid: HalfDiskGrid,
        ell: u32,
        h: Option<HSpec>,
    ) -> Result<Self> {
        let big_lambda = params.hardy_constant();
        let sup_h = match h {
            Some(h) => {
                if !(h.exponent > 0.0) {
                    return domain(format!(
                        "potential exponent eps must be positive, got {}",
                        h.exponent
                    ));
                }
                h.coefficient.abs() * grid.outer_radius().powf(h.exponent)
            }
            None => 0.0,
        };
        let load = params.lambda + sup_h;
        if load >= big_lambda {
            return domain(format!(
                "coercivity violated: lambda + sup|x|^(2s)|h| = {load:.6} >= Lambda = {big_lambda:.6}"
            ));
        }
        let basis = AngularBasis::full(&params, &grid.angular, ell)?;
        let trace = basis.trace_values();
        let sigma: Vec<f64> = basis
            .values
            .iter()
            .map(|&mu| params.exponents(mu).map(|e| e.sigma_plus))
            .collect::<Result<_>>()?;
        let c = params.gap();
        let rule = GaussRule::legendre(8);
        let u0 = grid.inner_radius().ln();
        let step = grid.log_step();
        let m = grid.cells();
        let ru = assemble(u0, step, m, &rule, true, |u| (c * u).exp());
        let rm = assemble(u0, step, m, &rule, false, |u| (c * u).exp());
        let volume = assemble(u0, step, m, &rule, false, |u| ((c + 2.0) * u).exp());
        let coupling = h.filter(|h| h.coefficient != 0.0).map(|h| {
            assemble(u0, step, m, &rule, false, |u| {
                h.coefficient * ((c + h.exponent) * u).exp()
            })
        });
        let outer = 2 * m;
        let robin = (c * u0).exp();
        let mut systems = Vec::with_capacity(basis.len());
        let mut factors = Vec::with_capacity(basis.len());
        for (k, &mu) in basis.values.iter().enumerate() {
            let mut a = ru.axpy(mu, &rm);
            a.add(0, 0, sigma[k] * robin);
            let full = a.clone();
            a.pin(outer);
            let chol = a.cholesky().ok_or_else(|| {
                Error::Numeric(format!(
                    "radial system of mode {} is not positive definite",
                    k + 1
                ))
            })?;
            systems.push(full);
            factors.push(chol);
        }
        Ok(Self {
            params,
            grid,
            h,
            basis,
            trace,
            sigma,
            systems,
            factors,
            coupling,
            volume,
            rule,
            coercivity_margin: 1.0 - load / big_lambda,
        })
    }

    pub fn basis(&self) -> &AngularBasis {
        &self.basis
    }

    pub fn grid(&self) -> &HalfDiskGrid {
        &self.grid
    }

    fn dofs(&self) -> usize {
        2 * self.grid.rings()
    }

    fn outer(&self) -> usize {
        2 * self.grid.cells()
    }

    /// The potential coupling -kappa p_k (R_h z + core) with z = sum_l p_l x_l;
    /// `pinned` drops the outer value dof from input and output.
    fn couple(&self, x: &[Vec<f64>], pinned: bool, out: &mut [Vec<f64>]) {
        let (Some(rh), Some(h)) = (&self.coupling, self.h) else {
            return;
        };
        let kappa = self.params.kappa();
        let outer = self.outer();
        let mut z = vec![0.0; self.dofs()];
        for (xk, pk) in x.iter().zip(&self.trace) {
            for (zi, xi) in z.iter_mut().zip(xk) {
                *zi += pk * xi;
            }
        }
        if pinned {
            z[outer] = 0.0;
        }
        let mut rz = rh.mul(&z);
        if pinned {
            rz[outer] = 0.0;
        }
        let c = self.params.gap();
        let r0 = self.grid.inner_radius();
        let core_scale = h.coefficient * r0.powf(c + h.exponent);
        for (k, ok) in out.iter_mut().enumerate() {
            let pk = self.trace[k];
            if pk == 0.0 {
                continue;
            }
            for (o, v) in ok.iter_mut().zip(&rz) {
                *o -= kappa * pk * v;
            }
            let mut core = 0.0;
            for (l, xl) in x.iter().enumerate() {
                let den = c + h.exponent + self.sigma[k] + self.sigma[l];
                core += self.trace[l] * xl[0] / den;
            }
            ok[0] -= kappa * pk * core_scale * core;
        }
    }

    fn apply(&self, x: &[Vec<f64>], pinned: bool) -> Vec<Vec<f64>> {
        let outer = self.outer();
        let mut out: Vec<Vec<f64>> = x
            .iter()
            .zip(&self.systems)
            .map(|(xk, a)| {
                if pinned {
                    let mut y = xk.clone();
                    y[outer] = 0.0;
                    let mut r = a.mul(&y);
                    r[outer] = xk[outer];
                    r
                } else {
                    a.mul(xk)
                }
            })
            .collect();
        self.couple(x, pinned, &mut out);
        out
    }

    /// |A||x| + |b| row by row, the denominator of the componentwise backward error.
    fn residual_scale(&self, x: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let abs: Vec<Vec<f64>> = x
            .iter()
            .map(|v| v.iter().map(|a| a.abs()).collect())
            .collect();
        let mut out: Vec<Vec<f64>> = abs
            .iter()
            .zip(&self.systems)
            .map(|(xk, a)| {
                let mut y = xk.clone();
                y[self.outer()] = 0.0;
                let mut s = a.abs_mul(&y);
                s[self.outer()] = xk[self.outer()];
                s
            })
            .collect();
        if let (Some(rh), Some(h)) = (&self.coupling, self.h) {
            let kappa = self.params.kappa();
            let mut z = vec![0.0; self.dofs()];
            for (xk, pk) in abs.iter().zip(&self.trace) {
                for (zi, xi) in z.iter_mut().zip(xk) {
                    *zi += pk.abs() * xi;
                }
            }
            z[self.outer()] = 0.0;
            let rz = rh.abs_mul(&z);
            let core: f64 = abs
                .iter()
                .zip(&self.trace)
                .map(|(x, p)| p.abs() * x[0])
                .sum();
            let core_scale = (h.coefficient
                * self
                    .grid
                    .inner_radius()
                    .powf(self.params.gap() + h.exponent))
            .abs();
            let den_min = self.params.gap()
                + h.exponent
                + 2.0 * self.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
            for (k, ok) in out.iter_mut().enumerate() {
                let pk = kappa * self.trace[k].abs();
                for (i, o) in ok.iter_mut().enumerate() {
                    if i != self.outer() {
                        *o += pk * rz[i];
                    }
                }
                ok[0] += pk * core_scale * core / den_min;
            }
        }
        for (ok, bk) in out.iter_mut().zip(b) {
            for (o, v) in ok.iter_mut().zip(bk) {
                *o += v.abs();
            }
        }
        out
    }

    fn backward_error(&self, x: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let ax = self.apply(x, true);
        let scale = self.residual_scale(x, b);
        let mut worst = 0.0f64;
        for k in 0..x.len() {
            for i in 0..x[k].len() {
                let r = (ax[k][i] - b[k][i]).abs();
                if r > 0.0 {
                    worst = worst.max(r / scale[k][i].max(f64::MIN_POSITIVE));
                }
            }
        }
        worst
    }

    fn precondition(&self, r: &[Vec<f64>]) -> Vec<Vec<f64>> {
        r.iter()
            .zip(&self.factors)
            .map(|(rk, f)| f.solve(rk))
            .collect()
    }

    /// Right-hand side with the Dirichlet values moved across.
    fn rhs(&self, g: &BoundaryDatum, load: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        if g.ell != self.basis.ell() {
            return domain(format!(
                "boundary datum has degree {} but the solver was built for degree {}",
                g.ell,
                self.basis.ell()
            ));
        }
        if g.values.len() != self.grid.angular.len() {
            return domain("boundary datum does not match the angular mesh");
        }
        let gk = self.basis.coefficients(&g.values);
        let outer = self.outer();
        let lift: Vec<Vec<f64>> = gk
            .iter()
            .map(|&v| {
                let mut x = vec![0.0; self.dofs()];
                x[outer] = v;
                x
            })
            .collect();
        let mut b = self.apply(&lift, false);
        for (k, bk) in b.iter_mut().enumerate() {
            for v in bk.iter_mut() {
                *v = -*v;
            }
            if let Some(load) = load {
                for (v, l) in bk.iter_mut().zip(&load[k]) {
                    *v += l;
                }
            }
            bk[outer] = gk[k];
        }
        Ok(b)
    }

    fn solve_system(&self, b: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, LinearReport)> {
        let mut x = self.precondition(b);
        let mut iterations = 0;
        if self.coupling.is_some() {
            let ax = self.apply(&x, true);
            let mut r: Vec<Vec<f64>> = b
                .iter()
                .zip(&ax)
                .map(|(bk, ak)| bk.iter().zip(ak).map(|(p, q)| p - q).collect())
                .collect();
            let mut z = self.precondition(&r);
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            let rz0 = rz.abs();
            while iterations < CG_MAX && rz.abs() > CG_TOL * CG_TOL * rz0 && rz != 0.0 {
                iterations += 1;
                let ap = self.apply(&p, true);
                let pap = dot(&p, &ap);
                if !(pap > 0.0) {
                    return Err(Error::Numeric(
                        "coupled extension system lost positive definiteness".into(),
                    ));
                }
                let alpha = rz / pap;
                axpy(&mut x, alpha, &p);
                axpy(&mut r, -alpha, &ap);
                z = self.precondition(&r);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for (pk, zk) in p.iter_mut().zip(&z) {
                    for (pi, zi) in pk.iter_mut().zip(zk) {
                        *pi = zi + beta * *pi;
                    }
                }
            }
        }
        let weak_residual = self.backward_error(&x, b);
        if !(weak_residual <= WEAK_RESIDUAL_TOL) {
            return Err(Error::Numeric(format!(
                "discrete weak form residual {weak_residual:.3e} exceeds {WEAK_RESIDUAL_TOL:.0e}"
            )));
        }
        Ok((
            x,
            LinearReport {
                weak_residual,
                cg_iterations: iterations,
                coercivity_margin: self.coercivity_margin,
            },
        ))
    }

    fn field(&self, x: &[Vec<f64>], f: Option<FSpec>) -> Result<ExtensionField> {
        let rings = self.grid.rings();
        let nodes = self.grid.angular.len();
        let mut values = vec![vec![0.0; nodes]; rings];
        let mut log_derivs = vec![vec![0.0; nodes]; rings];
        let mut core = Vec::new();
        for (xk, psi) in x.iter().zip(&self.basis.vectors) {
            for i in 0..rings {
                let (a, b) = (xk[2 * i], xk[2 * i + 1]);
                for j in 0..nodes {
                    values[i][j] += a * psi[j];
                    log_derivs[i][j] += b * psi[j];
                }
            }
        }
        for ((xk, psi), &sigma) in x.iter().zip(&self.basis.vectors).zip(&self.sigma) {
            if xk[0] != 0.0 {
                core.push(CoreTerm {
                    exponent: sigma,
                    profile: psi.iter().map(|p| p * xk[0]).collect(),
                });
            }
        }
        ExtensionField::new(
            self.params,
            self.basis.ell(),
            self.grid.clone(),
            values,
            log_derivs,
            core,
        )?
        .with_perturbations(self.h, f)
    }

    /// Solve the linear problem with Dirichlet data `g`.
    pub fn solve(&self, g: &BoundaryDatum) -> Result<(ExtensionField, LinearReport)> {
        let b = self.rhs(g, None)?;
        let (x, report) = self.solve_system(&b)?;
        Ok((self.field(&x, None)?, report))
    }

    /// Solve with the nonlinear boundary source f(w_prev) frozen at `source`.
    pub fn solve_with_source(
        &self,
        g: &BoundaryDatum,
        source: &ExtensionField,
        f: FSpec,
    ) -> Result<(ExtensionField, LinearReport)> {
        let coeffs = self.coefficients_of(source)?;
        let load = self.nonlinear_load(&coeffs, f);
        let b = self.rhs(g, Some(&load))?;
        let (x, report) = self.solve_system(&b)?;
        Ok((self.field(&x, Some(f))?, report))
    }

    /// Mode coefficients x_k of a field on the same grid.
    fn coefficients_of(&self, field: &ExtensionField) -> Result<Vec<Vec<f64>>> {
        if field.grid != self.grid || field.ell != self.basis.ell() {
            return domain("source field lives on a different grid or degree");
        }
        let mut x = vec![vec![0.0; self.dofs()]; self.basis.len()];
        for i in 0..self.grid.rings() {
            let a = self.basis.coefficients(&field.values[i]);
            let b = self.basis.coefficients(&field.log_derivs[i]);
            for k in 0..self.basis.len() {
                x[k][2 * i] = a[k];
                x[k][2 * i + 1] = b[k];
            }
        }
        Ok(x)
    }

    /// kappa * int e^{Nu} f_sec(W_tr) p_k phi_a du for every mode and dof,
    /// including the power-law core.
    fn nonlinear_load(&self, x: &[Vec<f64>], f: FSpec) -> Vec<Vec<f64>> {
        let params = &self.params;
        let kappa = params.kappa();
        let nn = params.n as f64;
        let area = params.boundary_sphere_area();
        let cf = f.coefficient * area.powf(-(f.power - 2.0) / 2.0);
        let p = f.power;
        let fsec = |w: f64| cf * w.abs().powf(p - 2.0) * w;
        let dofs = self.dofs();
        let mut z = vec![0.0; dofs];
        for (xk, pk) in x.iter().zip(&self.trace) {
            for (zi, xi) in z.iter_mut().zip(xk) {
                *zi += pk * xi;
            }
        }
        let mut scalar = vec![0.0; dofs];
        let u0 = self.grid.inner_radius().ln();
        let step = self.grid.log_step();
        for cell in 0..self.grid.cells() {
            let base = 2 * cell;
            for (t, w) in self.rule.mapped(0.0, 1.0) {
                let (v, _) = hermite(t, step);
                let u = u0 + (cell as f64 + t) * step;
                let tr: f64 = (0..4).map(|a| v[a] * z[base + a]).sum();
                let val = w * step * (nn * u).exp() * fsec(tr);
                for a in 0..4 {
                    scalar[base + a] += val * v[a];
                }
            }
        }
        let mut load: Vec<Vec<f64>> = self
            .trace
            .iter()
            .map(|pk| scalar.iter().map(|v| kappa * pk * v).collect())
            .collect();
        // Core: W_tr(u) = sum_l p_l x_l(0) e^{sigma_l (u - u0)}.
        let amps: Vec<(f64, f64)> = x
            .iter()
            .zip(&self.trace)
            .zip(&self.sigma)
            .filter(|((xk, pk), _)| xk[0] * **pk != 0.0)
            .map(|((xk, pk), s)| (pk * xk[0], *s))
            .collect();
        if !amps.is_empty() {
            let slowest = amps.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
            let fastest_mode = self.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
            let rate = nn + (p - 1.0) * slowest + fastest_mode;
            let span = (40.0 / rate.max(1e-3)).min(400.0);
            // f_sec(W_tr) e^{Nu} on the quadrature points, shared by all modes.
            let points: Vec<(f64, f64)> = (0..128)
                .flat_map(|cell| {
                    let a = u0 - span + span * cell as f64 / 128.0;
                    self.rule
                        .mapped(a, a + span / 128.0)
                        .map(|(u, w)| {
                            let tr: f64 = amps.iter().map(|(c, s)| c * (s * (u - u0)).exp()).sum();
                            (u, w * (nn * u).exp() * fsec(tr))
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            for (k, lk) in load.iter_mut().enumerate() {
                let pk = self.trace[k];
                if pk == 0.0 {
                    continue;
                }
                let sk = self.sigma[k];
                let core: f64 = points.iter().map(|(u, v)| v * (sk * (u - u0)).exp()).sum();
                lk[0] += kappa * pk * core;
            }
        }
        load
    }

    fn weighted_norm(&self, x: &[Vec<f64>]) -> f64 {
        x.iter()
            .map(|xk| self.volume.quad(xk))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Picard iteration w <- solve(g, f(w)) from the linear solution.
    pub fn solve_semilinear(
        &self,
        g: &BoundaryDatum,
        f: FSpec,
    ) -> Result<(ExtensionField, PicardReport)> {
        if self.basis.ell() != 0 && f.coefficient != 0.0 {
            return domain("the power nonlinearity is only supported for degree-0 data");
        }
        let critical = self.params.critical_exponent();
        if !(f.power > 2.0 && f.power <= critical + 1e-12) {
            return domain(format!(
                "nonlinearity power p = {} must satisfy 2 < p <= 2*(s) = {critical}",
                f.power
            ));
        }
        let b0 = self.rhs(g, None)?;
        let (mut x, _) = self.solve_system(&b0)?;
        let mut last;
        let smallness = self.smallness(&x, f);
        if f.coefficient != 0.0 && !(smallness < 1.0) {
            return domain(format!(
                "smallness condition fails on the first iterate: indicator {smallness:.4} >= 1"
            ));
        }
        let mut history = Vec::new();
        let mut omega = 1.0;
        let mut iterations = 0;
        loop {
            iterations += 1;
            let load = self.nonlinear_load(&x, f);
            let b = self.rhs(g, Some(&load))?;
            let (next, report) = self.solve_system(&b)?;
            last = report;
            let mut diff: Vec<Vec<f64>> = next
                .iter()
                .zip(&x)
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
                .collect();
            let scale = self.weighted_norm(&next).max(f64::MIN_POSITIVE);
            let change = self.weighted_norm(&diff) / scale;
            if history.last().is_some_and(|&prev| change > prev) {
                omega = (omega * 0.5f64).max(1.0 / 64.0);
            }
            history.push(change);
            if change <= PICARD_TOL {
                x = next;
                break;
            }
            if iterations >= PICARD_MAX {
                return Err(Error::Convergence {
                    iterations,
                    residual: change,
                });
            }
            for d in diff.iter_mut() {
                for v in d.iter_mut() {
                    *v *= omega;
                }
            }
            axpy(&mut x, 1.0, &diff);
        }
        let field = self.field(&x, Some(f))?;
        Ok((
            field,
            PicardReport {
                iterations,
                history,
                smallness,
                last,
            },
        ))
    }

    /// (lambda + sup|x|^{2s}|h| + C_f max_r r^{2s} |w_tr|^{p-2}) / Lambda.
    fn smallness(&self, x: &[Vec<f64>], f: FSpec) -> f64 {
        let params = &self.params;
        let sup_h = self.h.map_or(0.0, |h| {
            h.coefficient.abs() * self.grid.outer_radius().powf(h.exponent)
        });
        let y0 = params.boundary_sphere_area().powf(-0.5);
        let mut worst = 0.0f64;
        for i in 0..self.grid.rings() {
            let tr: f64 = x.iter().zip(&self.trace).map(|(xk, p)| p * xk[2 * i]).sum();
            let r = self.grid.radius(i);
            worst = worst.max(r.powf(2.0 * params.s) * (tr * y0).abs().powf(f.power - 2.0));
        }
        (params.lambda + sup_h + f.growth_constant() * worst) / params.hardy_constant()
    }
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

fn axpy(y: &mut [Vec<f64>], a: f64, x: &[Vec<f64>]) {
    for (yk, xk) in y.iter_mut().zip(x) {
        for (p, q) in yk.iter_mut().zip(xk) {
            *p += a * q;
        }
    }
}

/// Solve the linear extension problem with Dirichlet data `g` on the outer arc.
pub fn solve_linear(
    params: ProblemParams,
    grid: &HalfDiskGrid,
    g: &BoundaryDatum,
    h: Option<HSpec>,
) -> Result<(ExtensionField, LinearReport)> {
    ExtensionSolver::new(params, grid.clone(), g.ell, h)?.solve(g)
}

/// Solve the semilinear problem by Picard iteration on the nonlinear source.
pub fn solve_semilinear(
    params: ProblemParams,
    grid: &HalfDiskGrid,
    g: &BoundaryDatum,
    h: Option<HSpec>,
    f: FSpec,
) -> Result<(ExtensionField, PicardReport)> {
    ExtensionSolver::new(params, grid.clone(), g.ell, h)?.solve_semilinear(g, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{D_of_r, H_of_r};
    use crate::sphere::{AngularMesh, Spectrum};

    fn grid(cells: usize, nodes: usize) -> HalfDiskGrid {
        let mesh = AngularMesh::graded(nodes, 3.0).unwrap();
        HalfDiskGrid::new(1.0, 1e-4, cells, mesh).unwrap()
    }

    fn relative_l2(a: &ExtensionField, b: &ExtensionField) -> f64 {
        let m = &a.forms().mass;
        let (mut num, mut den) = (0.0, 0.0);
        for (ra, rb) in a.values.iter().zip(&b.values) {
            let d: Vec<f64> = ra.iter().zip(rb).map(|(x, y)| x - y).collect();
            num += m.quad(&d);
            den += m.quad(rb);
        }
        (num / den).sqrt()
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(32, 48);
        let (w, report) = solve_linear(params, &g, &BoundaryDatum::zero(0, 48), None).unwrap();
        assert!(w.is_zero());
        assert_eq!(report.weak_residual, 0.0);
    }

    #[test]
    fn mode_data_reproduces_the_separable_solution() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(128, 128);
        let spectrum = Spectrum::new(&params, &g.angular, 1, 2).unwrap();
        for mode in [spectrum.mode(0, 1).unwrap(), spectrum.mode(1, 1).unwrap()] {
            let sigma = params.exponents(mode.mu).unwrap().sigma_plus;
            let exact = ExtensionField::separable(params, g.clone(), mode, sigma).unwrap();
            let data = BoundaryDatum::new(mode.ell, mode.profile.clone()).unwrap();
            let (w, report) = solve_linear(params, &g, &data, None).unwrap();
            assert!(report.weak_residual <= 1e-10);
            let err = relative_l2(&w, &exact);
            assert!(err < 1e-3, "ell {} error {err}", mode.ell);
        }
    }

    #[test]
    fn coordinate_function_is_reproduced_at_zero_lambda() {
        let params = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let g = grid(64, 96);
        let data = BoundaryDatum::new(1, g.angular.sample(|p| p.sin())).unwrap();
        let (w, _) = solve_linear(params, &g, &data, None).unwrap();
        let exact = ExtensionField::power_profile(params, 1, g.clone(), &data.values, 1.0).unwrap();
        let err = relative_l2(&w, &exact);
        assert!(err < 1e-4, "error {err}");
    }

    #[test]
    fn coercivity_violation_is_refused() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.05).unwrap();
        let h = HSpec {
            coefficient: 1.0,
            exponent: 0.5,
        };
        let g = grid(16, 48);
        let err = ExtensionSolver::new(params, g, 0, Some(h)).unwrap_err();
        assert!(err.to_string().contains("coercivity"));
    }

    #[test]
    fn scaling_data_scales_h_and_d_quadratically() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(32, 64);
        let data = BoundaryDatum::new(0, g.angular.sample(|p| 1.0 + p.cos())).unwrap();
        let solver = ExtensionSolver::new(params, g, 0, None).unwrap();
        let (w1, _) = solver.solve(&data).unwrap();
        let (w3, _) = solver.solve(&data.scaled(3.0)).unwrap();
        for r in [1e-3, 0.1] {
            let (h1, h3) = (H_of_r(&w1, r).unwrap(), H_of_r(&w3, r).unwrap());
            let (d1, d3) = (D_of_r(&w1, r).unwrap(), D_of_r(&w3, r).unwrap());
            assert!((h3 / h1 - 9.0).abs() < 1e-10);
            assert!((d3 / d1 - 9.0).abs() < 1e-8);
        }
    }

    #[test]
    fn potential_coupling_converges() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(64, 64);
        let h = HSpec {
            coefficient: 0.1,
            exponent: 0.5,
        };
        let data = BoundaryDatum::new(0, g.angular.sample(|p| 1.0 + p.cos())).unwrap();
        let (w, report) = solve_linear(params, &g, &data, Some(h)).unwrap();
        assert!(report.cg_iterations > 0);
        assert!(report.weak_residual <= 1e-10);
        assert!(H_of_r(&w, 1e-3).unwrap() > 0.0);
    }

    #[test]
    fn vanishing_nonlinearity_matches_linear_solve() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(32, 48);
        let data = BoundaryDatum::new(0, g.angular.sample(|p| 1.0 + p.cos())).unwrap();
        let f = FSpec {
            coefficient: 0.0,
            power: 2.5,
        };
        let (lin, _) = solve_linear(params, &g, &data, None).unwrap();
        let (semi, report) = solve_semilinear(params, &g, &data, None, f).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(lin.values, semi.values);
    }

    #[test]
    fn small_nonlinearity_matches_first_picard_correction() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(48, 64);
        let data = BoundaryDatum::new(0, g.angular.sample(|p| 1.0 + p.cos())).unwrap();
        let f = FSpec {
            coefficient: 1e-6,
            power: 3.0,
        };
        let solver = ExtensionSolver::new(params, g, 0, None).unwrap();
        let (lin, _) = solver.solve(&data).unwrap();
        let (corrected, _) = solver.solve_with_source(&data, &lin, f).unwrap();
        let (semi, report) = solver.solve_semilinear(&data, f).unwrap();
        assert!(report.iterations > 1);
        assert!(relative_l2(&semi, &corrected) < 1e-4);
        assert!(relative_l2(&semi, &lin) > 0.0);
    }

    #[test]
    fn zero_data_semilinear_stops_at_first_iteration() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(16, 48);
        let f = FSpec {
            coefficient: 1.0,
            power: 3.0,
        };
        let (w, report) =
            solve_semilinear(params, &g, &BoundaryDatum::zero(0, 48), None, f).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(w.is_zero());
    }

    #[test]
    fn supercritical_power_is_rejected() {
        let params = ProblemParams::from_alpha(3, 0.5, 0.5).unwrap();
        let g = grid(16, 48);
        let f = FSpec {
            coefficient: 1.0,
            power: params.critical_exponent() + 0.1,
        };
        assert!(solve_semilinear(params, &g, &BoundaryDatum::zero(0, 48), None, f).is_err());
    }
}
