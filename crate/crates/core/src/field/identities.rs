use super::extension::ExtensionField;
use crate::error::Result;

/// H(r): the weighted L^2 mass of w(r .) on the unit half sphere.
#[allow(non_snake_case)]
pub fn H_of_r(field: &ExtensionField, r: f64) -> Result<f64> {
    Ok(field.sphere(r)?.h)
}

/// D(r): the scaled energy minus the boundary potential terms on B_r'.
#[allow(non_snake_case)]
pub fn D_of_r(field: &ExtensionField, r: f64) -> Result<f64> {
    let b = field.ball(r)?;
    let p = &field.params;
    let kappa = p.kappa();
    let inner = b.energy - kappa * (p.lambda * b.hardy_trace + b.h_trace + b.f_trace);
    Ok(inner / r.powf(p.gap()))
}

/// The frequency N(r) = D(r) / H(r).
pub fn frequency(field: &ExtensionField, r: f64) -> Result<f64> {
    Ok(D_of_r(field, r)? / H_of_r(field, r)?)
}

/// The individual terms of the Pohozaev identity at radius r, left-hand
/// side first.
pub fn pohozaev_terms(field: &ExtensionField, r: f64) -> Result<([f64; 2], [f64; 5])> {
    let b = field.ball(r)?;
    let sph = field.sphere(r)?;
    let p = &field.params;
    let kappa = p.kappa();
    let c = p.gap();
    let eps = field.h.map_or(0.0, |h| h.exponent);
    let lhs = [
        -0.5 * c * (b.energy - kappa * p.lambda * b.hardy_trace),
        0.5 * r * (sph.grad - kappa * p.lambda * sph.hardy_trace),
    ];
    let rhs = [
        r * sph.normal,
        -0.5 * kappa * (c + eps) * b.h_trace,
        0.5 * r * kappa * sph.h_trace,
        r * kappa * sph.big_f,
        -kappa * p.n as f64 * b.big_f,
    ];
    Ok((lhs, rhs))
}

/// |LHS - RHS| of the Pohozaev identity relative to its largest term.
pub fn pohozaev_residual(field: &ExtensionField, r: f64) -> Result<f64> {
    let (lhs, rhs) = pohozaev_terms(field, r)?;
    let scale = lhs.iter().chain(&rhs).fold(0.0f64, |m, t| m.max(t.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs.iter().sum::<f64>() - rhs.iter().sum::<f64>()).abs() / scale)
}

/// Relative mismatch between a centered difference of H and 2 D(r) / r.
pub fn h_prime_identity_residual(field: &ExtensionField, r: f64) -> Result<f64> {
    field.check_radius(r)?;
    let step = 0.25 * field.grid.log_step();
    let (lo, hi) = (r * (-step).exp(), r * step.exp());
    field.check_radius(lo)?;
    field.check_radius(hi)?;
    let dh = (H_of_r(field, hi)? - H_of_r(field, lo)?) / (hi - lo);
    let rhs = 2.0 * D_of_r(field, r)? / r;
    let den = dh.abs() + rhs.abs();
    if den < 1e-300 {
        return Ok(0.0);
    }
    Ok((dh - rhs).abs() / den)
}

/// Relative distance ||a - b|| / ||b|| in the weighted norm
/// (int_{B_R^+} t^{1-2s} w^2)^{1/2}, by Gauss quadrature in log-radius.
pub fn weighted_l2_distance(a: &ExtensionField, b: &ExtensionField) -> Result<f64> {
    if a.grid != b.grid || a.ell != b.ell || a.params != b.params {
        return crate::error::domain("fields live on different grids, degrees or parameters");
    }
    let mass = &b.forms().mass;
    let c = b.params.gap();
    let rule = crate::quadrature::GaussRule::legendre(8);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..b.grid.cells() {
        for (u, w) in rule.mapped(b.grid.log_radius(i), b.grid.log_radius(i + 1)) {
            let wa = a.section_at_log(u).0;
            let wb = b.section_at_log(u).0;
            let d: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| x - y).collect();
            let weight = w * ((c + 2.0) * u).exp();
            num += weight * mass.quad(&d);
            den += weight * mass.quad(&wb);
        }
    }
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}
