//! Checks of the explicit-constant functional inequalities on discrete
//! fields, the Kelvin-transform identities and a report-only Sobolev ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::closed_forms::ProblemParams;
use crate::error::{domain, Result};
use crate::field::{CoreTerm, ExtensionField, FieldIntegrator, HalfDiskGrid};
use crate::quadrature::GaussRule;
use crate::sphere::{assemble_sl, harmonic_lq_norm, AngularMesh};

/// Roundoff allowance, relative to the larger side, when deciding a pass.
pub const ROUNDOFF: f64 = 1e-12;

/// One side-by-side evaluation of an inequality lhs <= rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs - lhs
    pub margin: f64,
    /// `None` in report-only mode.
    pub passed: Option<bool>,
    /// lhs / rhs in report-only mode.
    pub empirical_constant: Option<f64>,
}

impl InequalityReport {
    fn checked(name: &str, lhs: f64, rhs: f64) -> Self {
        let ok = lhs <= rhs + ROUNDOFF * lhs.abs().max(rhs.abs());
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            passed: Some(ok && lhs.is_finite() && rhs.is_finite()),
            empirical_constant: None,
        }
    }

    fn report_only(name: &str, lhs: f64, rhs: f64) -> Self {
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            passed: None,
            empirical_constant: Some(ratio),
        }
    }
}

/// CSV rows inequality, case_id, lhs, rhs, margin, passed.
pub fn reports_csv(rows: &[(String, InequalityReport)]) -> String {
    let mut s = String::from("inequality,case_id,lhs,rhs,margin,passed\n");
    for (case, r) in rows {
        let passed = match r.passed {
            Some(true) => "true",
            Some(false) => "false",
            None => "report-only",
        };
        let _ = writeln!(
            s,
            "{},{},{:.17e},{:.17e},{:.17e},{}",
            r.name, case, r.lhs, r.rhs, r.margin, passed
        );
    }
    s
}

/// ((N-2s)/2)^2 int t^{1-2s} w^2/|z|^2 <= int t^{1-2s} (dw/d|z|)^2
/// + (N-2s)/(2r) int_{S_r^+} t^{1-2s} w^2.
pub fn hardy_boundary(field: &ExtensionField, r: f64) -> Result<InequalityReport> {
    hardy_boundary_with(field, field.integrator(), r)
}

/// [`hardy_boundary`] with an explicit ball quadrature.
pub fn hardy_boundary_with(
    field: &ExtensionField,
    integrator: &FieldIntegrator,
    r: f64,
) -> Result<InequalityReport> {
    field.check_radius(r)?;
    let b = integrator.ball(field, r);
    let half = 0.5 * field.params.gap();
    let sphere = field.sphere(r)?;
    let lhs = half * half * b.mass_over_r2;
    let rhs = b.radial_energy + half / r * sphere.mass;
    Ok(InequalityReport::checked("hardy_boundary", lhs, rhs))
}

/// kappa_s Lambda int_{B_r'} w^2/|x|^{2s} <= (N-2s)/(2r) int_{S_r^+} t^{1-2s} w^2
/// + int_{B_r^+} t^{1-2s} |grad w|^2.
pub fn hardy_trace(field: &ExtensionField, r: f64) -> Result<InequalityReport> {
    let b = field.ball(r)?;
    let p = &field.params;
    let sphere = field.sphere(r)?;
    let lhs = p.kappa() * p.hardy_constant() * b.hardy_trace;
    let rhs = 0.5 * p.gap() / r * sphere.mass + b.energy;
    Ok(InequalityReport::checked("hardy_trace", lhs, rhs))
}

/// kappa_s (Lambda - lambda) int w^2/|x|^{2s} <= int t^{1-2s}|grad w|^2
/// - kappa_s lambda int w^2/|x|^{2s} + (N-2s)/(2r) int_{S_r^+} t^{1-2s} w^2.
pub fn coercivity(field: &ExtensionField, r: f64, lambda: f64) -> Result<InequalityReport> {
    let p = &field.params;
    let big = p.hardy_constant();
    if !(lambda < big) {
        return domain(format!("lambda = {lambda} must be below Lambda = {big}"));
    }
    let b = field.ball(r)?;
    let sphere = field.sphere(r)?;
    let k = p.kappa();
    let lhs = k * (big - lambda) * b.hardy_trace;
    let rhs = b.energy - k * lambda * b.hardy_trace + 0.5 * p.gap() / r * sphere.mass;
    Ok(InequalityReport::checked("coercivity", lhs, rhs))
}

/// (int_{B_r'} |w|^{2*})^{2/2*} against the bracket of the boundary Sobolev
/// inequality; the ratio is reported, never judged.
pub fn sobolev_trace_report(field: &ExtensionField, r: f64) -> Result<InequalityReport> {
    let b = field.ball(r)?;
    let p = &field.params;
    let sphere = field.sphere(r)?;
    let q = p.critical_exponent();
    let nn = p.n as f64;
    let rule = GaussRule::legendre(8);
    let grid = &field.grid;
    let u_end = r.ln();
    let integrand = |u: f64| (nn * u).exp() * field.trace_at_log(u).0.abs().powf(q);
    let mut radial = 0.0;
    for i in 0..grid.cells() {
        let (a, bb) = (grid.log_radius(i), grid.log_radius(i + 1).min(u_end));
        if bb <= a {
            break;
        }
        radial += rule.integrate(a, bb, integrand);
    }
    let j = field.trace_index();
    let slowest = field
        .core
        .iter()
        .filter(|t| t.profile[j] != 0.0)
        .map(|t| t.exponent)
        .fold(f64::INFINITY, f64::min);
    if slowest.is_finite() {
        let rate = nn + q * slowest;
        let u0 = grid.inner_radius().ln();
        let span = (40.0 / rate.max(1e-3)).min(2000.0);
        radial += rule.integrate_composite(u0 - span, u0, 256, integrand);
    }
    let lq = harmonic_lq_norm(p.n, field.ell, q) * radial;
    let lhs = lq.powf(2.0 / q);
    let rhs = 0.5 * p.gap() / r * sphere.mass + b.energy;
    Ok(InequalityReport::report_only("sobolev_trace", lhs, rhs))
}

/// Both Kelvin-transform identities on a separable field r^a P(phi) Y_ell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KelvinReport {
    /// int_{B_1^+} t^{1-2s}|grad w|^2 + (N-2s) int_{S_1^+} t^{1-2s} w^2
    pub energy_lhs: f64,
    /// int over the exterior of t^{1-2s}|grad w~|^2
    pub energy_rhs: f64,
    pub energy_residual: f64,
    /// int_{B_1'} |w|^{2*}
    pub trace_lhs: f64,
    /// int_{|x|>1} |w~|^{2*}
    pub trace_rhs: f64,
    pub trace_residual: f64,
}

/// Evaluate the Kelvin identities with `cells` Gauss cells per radial
/// integral in log-radius. The exterior side differentiates the transformed
/// field w~(rho) = rho^{-(N-2s)} w(1/rho) numerically in rho.
pub fn kelvin_identity(
    params: &ProblemParams,
    mesh: &AngularMesh,
    ell: u32,
    profile: &[f64],
    a: f64,
    cells: usize,
) -> Result<KelvinReport> {
    let c = params.gap();
    if !(a > -0.5 * c) {
        return domain(format!(
            "exponent a = {a} must exceed -(N-2s)/2 = {} for the transform to have finite energy",
            -0.5 * c
        ));
    }
    if profile.len() != mesh.len() || cells == 0 {
        return domain("profile does not match the mesh");
    }
    let forms = assemble_sl(params, ell, mesh);
    let m = forms.mass.quad(profile);
    let k = forms.energy(profile);
    let tr = profile[forms.trace_index()].abs();
    let q = params.critical_exponent();
    let nn = params.n as f64;
    let lq = harmonic_lq_norm(params.n, ell, q);
    let rule = GaussRule::legendre(8);
    // Integrals over (0, 1] and [1, inf) in u = ln rho, truncated where the
    // integrand has decayed by e^{-60}, plus the exact tail beyond.
    let decay = c + 2.0 * a;
    let span = 60.0 / decay;
    let interior = |f: &dyn Fn(f64) -> f64| rule.integrate_composite(-span, 0.0, cells, f);
    let exterior = |f: &dyn Fn(f64) -> f64| rule.integrate_composite(0.0, span, cells, f);
    let tail = (-60.0f64).exp() / decay;

    // Interior: |grad w|^2 = rho^{2a-2}(a^2 P^2 + |grad_S P|^2), volume rho^{N-2s} d rho.
    let inner = interior(&|u: f64| (decay * u).exp() * (a * a * m + k)) + tail * (a * a * m + k);
    let energy_lhs = inner + c * m;
    // Exterior: w~(rho) = rho^{-c} (1/rho)^a P.
    let radial = |rho: f64| rho.powf(-c) * (1.0 / rho).powf(a);
    let outer = exterior(&|u: f64| {
        let rho = u.exp();
        let h = 1e-3 * rho;
        let d = (radial(rho - 2.0 * h) - 8.0 * radial(rho - h) + 8.0 * radial(rho + h)
            - radial(rho + 2.0 * h))
            / (12.0 * h);
        let w = radial(rho);
        // rho^{c-1} d rho = rho^c du, |grad w~|^2 = d^2 P^2 + w^2 |grad_S P|^2 / rho^2.
        rho.powf(c + 2.0) * (d * d * m + w * w * k / (rho * rho))
    });
    let outer_tail = tail * ((a + c).powi(2) * m + k);
    let energy_rhs = outer + outer_tail;

    let trace_rate = nn + a * q;
    let trace_span = 60.0 / trace_rate;
    let trace_tail = (-60.0f64).exp() / trace_rate;
    let amp = tr.powf(q) * lq;
    let trace_lhs = amp
        * (rule.integrate_composite(-trace_span, 0.0, cells, |u| (trace_rate * u).exp())
            + trace_tail);
    let trace_rhs = amp
        * (rule.integrate_composite(0.0, trace_span, cells, |u| {
            let rho = u.exp();
            rho.powf(nn) * radial(rho).abs().powf(q)
        }) + trace_tail);
    let rel = |x: f64, y: f64| {
        if y == 0.0 {
            x.abs()
        } else {
            (x - y).abs() / y.abs()
        }
    };
    Ok(KelvinReport {
        energy_lhs,
        energy_rhs,
        energy_residual: rel(energy_lhs, energy_rhs),
        trace_lhs,
        trace_rhs,
        trace_residual: rel(trace_lhs, trace_rhs),
    })
}

/// A random field on `grid`: nodal values and log-derivatives uniform in
/// [-1, 1] on every ring, continued below r_min by a random admissible power.
pub fn random_field(
    params: ProblemParams,
    grid: &HalfDiskGrid,
    ell: u32,
    seed: u64,
) -> Result<ExtensionField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = grid.angular.len();
    let table = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..grid.rings())
            .map(|_| (0..nodes).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect()
    };
    let values = table(&mut rng);
    let log_derivs = table(&mut rng);
    let c = params.gap();
    let exponent = rng.gen_range(-0.45 * c..=2.0);
    let core = vec![CoreTerm {
        exponent,
        profile: values[0].clone(),
    }];
    ExtensionField::new(params, ell, grid.clone(), values, log_derivs, core)
}

/// Gauss rule whose weights are all inflated by the factor 1 + `amount`: a
/// deliberately broken rule for negative controls.
pub fn corrupted_rule(points: usize, amount: f64) -> GaussRule {
    let mut rule = GaussRule::legendre(points);
    for w in rule.weights.iter_mut() {
        *w *= 1.0 + amount;
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{gamma_fn, sphere_area};
    use crate::sphere::Spectrum;

    fn grid(params: &ProblemParams, r_min: f64, cells: usize, nodes: usize) -> HalfDiskGrid {
        let _ = params;
        let mesh = AngularMesh::graded(nodes, 3.0).unwrap();
        HalfDiskGrid::new(1.0, r_min, cells, mesh).unwrap()
    }

    /// w = |z|^{-c/2} down to r_min, constant below.
    fn hardy_extremal(params: ProblemParams, r_min: f64, cells: usize) -> ExtensionField {
        let g = grid(&params, r_min, cells, 64);
        let c = params.gap();
        ExtensionField::from_fn(
            params,
            0,
            g,
            |r, _| r.powf(-0.5 * c),
            |r, _| -0.5 * c * r.powf(-0.5 * c),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn extremal_power_is_nearly_sharp_for_boundary_hardy() {
        let params = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let r_min: f64 = 1e-12;
        let field = hardy_extremal(params, r_min, 256);
        let rep = hardy_boundary(&field, 1.0).unwrap();
        assert_eq!(rep.passed, Some(true));
        let rel = rep.margin / rep.lhs;
        let expect = 1.0 / (params.gap() * (-r_min.ln()) + 1.0);
        assert!(rel <= 0.02, "{rel}");
        assert!((rel / expect - 1.0).abs() < 1e-6, "{rel} vs {expect}");
    }

    #[test]
    fn zero_field_gives_trivial_equalities() {
        let params = ProblemParams::new(3, 0.5, 0.5).unwrap();
        let field = ExtensionField::zero(params, 0, grid(&params, 1e-4, 16, 40)).unwrap();
        for rep in [
            hardy_boundary(&field, 0.7).unwrap(),
            hardy_trace(&field, 0.7).unwrap(),
            coercivity(&field, 0.7, 0.5).unwrap(),
        ] {
            assert_eq!((rep.lhs, rep.rhs, rep.passed), (0.0, 0.0, Some(true)));
        }
        let sob = sobolev_trace_report(&field, 0.7).unwrap();
        assert_eq!((sob.passed, sob.empirical_constant), (None, Some(0.0)));
    }

    #[test]
    fn constant_field_matches_closed_forms() {
        for s in [0.25, 0.5, 0.75] {
            let params = ProblemParams::new(3, s, 0.0).unwrap();
            let field =
                ExtensionField::constant(params, grid(&params, 1e-4, 32, 256), 1.0).unwrap();
            let r = 0.6;
            let rep = hardy_trace(&field, r).unwrap();
            let c = params.gap();
            let area = sphere_area(2);
            let lhs = params.kappa() * params.hardy_constant() * area * r.powf(c) / c;
            // int_0^{pi/2} cos^{1-2s} sin^{N-1} = B(N/2, 1-s)/2
            let half_sphere = 0.5 * gamma_fn(1.5).unwrap() * gamma_fn(1.0 - s).unwrap()
                / gamma_fn(2.5 - s).unwrap();
            let rhs = 0.5 * c / r * r.powf(c + 1.0) * half_sphere * area;
            assert!(
                (rep.lhs / lhs - 1.0).abs() < 1e-9,
                "s={s}: {} vs {lhs}",
                rep.lhs
            );
            assert!(
                (rep.rhs / rhs - 1.0).abs() < 1e-3,
                "s={s}: {} vs {rhs}",
                rep.rhs
            );
            assert_eq!(rep.passed, Some(true));
            let sob = sobolev_trace_report(&field, r).unwrap();
            assert!(sob.empirical_constant.unwrap().is_finite());
            assert!(sob.empirical_constant.unwrap() > 0.0);
        }
    }

    #[test]
    fn random_fields_satisfy_all_explicit_inequalities() {
        let params = ProblemParams::new(3, 0.5, 0.5).unwrap();
        let g = grid(&params, 1e-4, 24, 40);
        let big = params.hardy_constant();
        for seed in 0..40 {
            let ell = (seed % 3) as u32;
            let field = random_field(params, &g, ell, seed).unwrap();
            for r in [1e-3, 0.05, 1.0] {
                assert_eq!(hardy_boundary(&field, r).unwrap().passed, Some(true));
                assert_eq!(hardy_trace(&field, r).unwrap().passed, Some(true));
                let at_zero = coercivity(&field, r, 0.0).unwrap();
                let trace = hardy_trace(&field, r).unwrap();
                assert!((at_zero.margin - trace.margin).abs() <= 1e-12 * trace.rhs);
                assert_eq!(coercivity(&field, r, 0.5 * big).unwrap().passed, Some(true));
            }
        }
    }

    #[test]
    fn coercivity_rejects_lambda_at_the_hardy_constant() {
        let params = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let field = ExtensionField::constant(params, grid(&params, 1e-4, 8, 40), 1.0).unwrap();
        assert!(coercivity(&field, 1.0, params.hardy_constant()).is_err());
        assert!(coercivity(&field, 1.0, 0.99 * params.hardy_constant()).is_ok());
    }

    #[test]
    fn trace_hardy_margin_shrinks_on_near_extremal_family() {
        let params = ProblemParams::from_alpha(3, 0.5, 1e-4).unwrap();
        let mesh = AngularMesh::graded(128, 3.0).unwrap();
        let spectrum = Spectrum::new(&params, &mesh, 0, 1).unwrap();
        let profile = &spectrum.mode(0, 1).unwrap().profile;
        let g = HalfDiskGrid::new(1.0, 1e-4, 128, mesh).unwrap();
        let c = params.gap();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for alpha in [0.4, 0.2, 0.1, 0.05, 0.02] {
            let field =
                ExtensionField::power_profile(params, 0, g.clone(), profile, -0.5 * c + alpha)
                    .unwrap();
            let rep = hardy_trace(&field, 1.0).unwrap();
            assert_eq!(rep.passed, Some(true));
            let rel = rep.margin / rep.lhs;
            assert!(
                rep.margin < last.0 && rel < last.1,
                "alpha {alpha}: {rep:?}"
            );
            last = (rep.margin, rel);
        }
        assert!(last.1 < 1e-3, "{}", last.1);
    }

    #[test]
    fn corrupted_weights_break_boundary_hardy() {
        let params = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let g = grid(&params, 1e-4, 64, 40);
        let ones = vec![1.0; 40];
        let field =
            ExtensionField::power_profile(params, 0, g, &ones, -0.5 * params.gap() + 0.05).unwrap();
        let good = hardy_boundary(&field, 1.0).unwrap();
        assert_eq!(good.passed, Some(true));
        let bad = FieldIntegrator::new(&field, corrupted_rule(8, 0.1));
        let rep = hardy_boundary_with(&field, &bad, 1.0).unwrap();
        assert_eq!(rep.passed, Some(false), "{rep:?}");
    }

    fn kelvin_case(s: f64, ell: u32, a: f64, cells: usize) -> KelvinReport {
        let params = ProblemParams::new(3, s, 0.0).unwrap();
        let mesh = AngularMesh::graded(128, 3.0).unwrap();
        let profile = if ell == 0 {
            vec![1.0; mesh.len()]
        } else {
            mesh.sample(f64::sin)
        };
        kelvin_identity(&params, &mesh, ell, &profile, a, cells).unwrap()
    }

    #[test]
    fn kelvin_identity_for_constants() {
        for s in [0.25, 0.5, 0.75] {
            let rep = kelvin_case(s, 0, 0.0, 64);
            assert!(rep.energy_residual <= 1e-8, "s={s}: {rep:?}");
            assert!(rep.trace_residual <= 1e-10, "s={s}: {rep:?}");
            // Both trace sides equal |B_1'| = |S^{N-1}|/N times the harmonic weight.
            let q = crate::closed_forms::critical_exponent(3, s);
            let expect = harmonic_lq_norm(3, 0, q) / 3.0;
            assert!((rep.trace_lhs / expect - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn kelvin_identity_for_linear_field() {
        let rep = kelvin_case(0.5, 1, 1.0, 64);
        assert!(rep.energy_residual <= 1e-6, "{rep:?}");
        assert!(rep.trace_residual <= 1e-6, "{rep:?}");
        let coarse = kelvin_case(0.5, 1, 1.0, 2);
        let fine = kelvin_case(0.5, 1, 1.0, 4);
        assert!(fine.energy_residual <= coarse.energy_residual);
    }

    #[test]
    fn kelvin_identity_rejects_divergent_exponent() {
        let params = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let mesh = AngularMesh::graded(40, 3.0).unwrap();
        let ones = vec![1.0; 40];
        assert!(kelvin_identity(&params, &mesh, 0, &ones, -1.0, 8).is_err());
        assert!(kelvin_identity(&params, &mesh, 0, &ones, -0.9, 8).is_ok());
    }

    #[test]
    fn csv_lists_every_report() {
        let rows = vec![
            (
                "a".to_string(),
                InequalityReport::checked("hardy_trace", 1.0, 2.0),
            ),
            (
                "b".to_string(),
                InequalityReport::report_only("sobolev_trace", 1.0, 4.0),
            ),
        ];
        let csv = reports_csv(&rows);
        assert!(csv.starts_with("inequality,case_id,lhs,rhs,margin,passed\n"));
        assert!(csv.contains(",a,") && csv.contains("report-only"));
        assert_eq!(csv.lines().count(), 3);
    }
}
