use super::tridiag::SymTridiag;
use crate::error::{Error, Result};

/// Eigenvalue and M-normalized eigenvector of a pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Symmetric tridiagonal pencil (K, M) with K split as
/// `ground * e_0 e_0^T + sum_i springs[i] (e_i - e_{i+1})(e_i - e_{i+1})^T + extra`.
///
/// Keeping the gradient part as spring constants lets the inertia sweep and
/// the quadratic forms avoid cancellation between the huge stiffness entries
/// that graded meshes produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    pub ground: f64,
    pub springs: Vec<f64>,
    pub extra: SymTridiag,
    pub mass: SymTridiag,
}

impl Pencil {
    /// Plain matrices, no spring split.
    pub fn from_matrices(k: &SymTridiag, m: &SymTridiag) -> Self {
        Self {
            ground: 0.0,
            springs: vec![0.0; k.len().saturating_sub(1)],
            extra: k.clone(),
            mass: m.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Assembled K.
    pub fn stiffness(&self) -> SymTridiag {
        let mut k = self.extra.clone();
        k.diag[0] += self.ground;
        for (i, &c) in self.springs.iter().enumerate() {
            k.diag[i] += c;
            k.diag[i + 1] += c;
            k.off[i] -= c;
        }
        k
    }

    pub fn k_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.extra.mul(x);
        y[0] += self.ground * x[0];
        for (i, &c) in self.springs.iter().enumerate() {
            let f = c * (x[i] - x[i + 1]);
            y[i] += f;
            y[i + 1] -= f;
        }
        y
    }

    pub fn k_quad(&self, x: &[f64]) -> f64 {
        let springs: f64 = self
            .springs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (x[i + 1] - x[i]).powi(2))
            .sum();
        springs + self.ground * x[0] * x[0] + self.extra.quad(x)
    }

    /// Pivots of the U D U^T factorization of K - mu M, computed as excesses
    /// over the spring that ties each row to its predecessor.
    /// Returns (pivots d_i, upper multipliers u_i).
    fn factor(&self, mu: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let m = &self.mass;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut d = vec![0.0; n];
        let mut u = vec![0.0; n.saturating_sub(1)];
        let tie = |i: usize| {
            if i == 0 {
                self.ground
            } else {
                self.springs[i - 1]
            }
        };
        let mut excess = self.extra.diag[n - 1] - mu * m.diag[n - 1];
        for i in (0..n).rev() {
            if i < n - 1 {
                let k = self.springs[i];
                let w = self.extra.off[i] - mu * m.off[i];
                let below = d[i + 1];
                let v = self.extra.diag[i] - mu * m.diag[i];
                excess = v + (k * (excess + 2.0 * w) - w * w) / below;
                u[i] = (w - k) / below;
            }
            let mut di = tie(i) + excess;
            if di == 0.0 {
                di = -tiny;
            }
            d[i] = di;
        }
        (d, u)
    }

    /// Number of eigenvalues below `mu` (negative pivots of K - mu M).
    pub fn count_below(&self, mu: f64) -> usize {
        self.factor(mu).0.iter().filter(|&&v| v < 0.0).count()
    }

    /// Solve (K - mu M) x = rhs through the U D U^T factorization.
    pub fn shifted_solve(&self, mu: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let (mut d, u) = self.factor(mu);
        let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = f64::EPSILON * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        for v in d.iter_mut() {
            if v.abs() < floor {
                *v = if *v < 0.0 { -floor } else { floor };
            }
        }
        let mut y = rhs.to_vec();
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= u[i] * y[i + 1];
        }
        for (yi, di) in y.iter_mut().zip(&d) {
            *yi /= di;
        }
        for i in 1..n {
            y[i] -= u[i - 1] * y[i - 1];
        }
        y
    }

    /// ||K x - mu M x|| / (|| |K||x| || + |mu| || |M||x| ||).
    pub fn backward_error(&self, mu: f64, x: &[f64]) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let kx = self.k_mul(x);
        let mx = self.mass.mul(x);
        let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - mu * b).collect();
        let mut abs_k = self.extra.abs_mul(x);
        abs_k[0] += (self.ground * x[0]).abs();
        for (i, &c) in self.springs.iter().enumerate() {
            let f = c.abs() * (x[i].abs() + x[i + 1].abs());
            abs_k[i] += f;
            abs_k[i + 1] += f;
        }
        let scale = norm(&abs_k) + mu.abs() * norm(&self.mass.abs_mul(x));
        if scale == 0.0 {
            0.0
        } else {
            norm(&r) / scale
        }
    }
}

/// Lowest `count` eigenpairs of K x = mu M x for symmetric tridiagonal K and
/// positive definite tridiagonal M.
pub fn solve_pencil(k: &SymTridiag, m: &SymTridiag, count: usize) -> Result<Vec<EigenPair>> {
    if m.len() != k.len() {
        return Err(Error::Numeric(
            "pencil matrices have mismatched sizes".into(),
        ));
    }
    solve_spring_pencil(&Pencil::from_matrices(k, m), count)
}

/// Eigenvalues come from bisection on the inertia of K - mu M, eigenvectors
/// from inverse iteration followed by M-orthogonalization inside clusters.
/// Each eigenvalue is bracketed independently of `count`, so the first pairs
/// do not depend on how many were requested.
pub fn solve_spring_pencil(p: &Pencil, count: usize) -> Result<Vec<EigenPair>> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Numeric("empty pencil".into()));
    }
    if count > n {
        return Err(Error::Domain(format!(
            "requested {count} eigenpairs of a pencil of size {n}"
        )));
    }
    check_positive_definite(&p.mass)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let k = p.stiffness();
    let scale = (0..n)
        .map(|i| (k.diag[i] / p.mass.diag[i]).abs())
        .fold(1.0f64, f64::max);
    let mut lo = -scale;
    while p.count_below(lo) > 0 {
        lo *= 2.0;
    }
    let mut hi = 2.0 * scale;
    while p.count_below(hi) < n {
        hi *= 2.0;
    }

    let m = &p.mass;
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(count);
    for j in 0..count {
        let value = bisect(p, j, lo, hi);
        let mut x = start_vector(n, j);
        for _ in 0..4 {
            let rhs = m.mul(&x);
            x = p.shifted_solve(value, &rhs);
            normalize(m, &mut x);
        }
        let cluster_tol = 1e-9 * (value.abs() + 1.0);
        for _ in 0..2 {
            for q in pairs.iter().rev() {
                if (value - q.value).abs() > cluster_tol {
                    break;
                }
                let c = m.bilinear(&x, &q.vector);
                for (xi, qi) in x.iter_mut().zip(&q.vector) {
                    *xi -= c * qi;
                }
            }
            normalize(m, &mut x);
        }
        fix_sign(&mut x);
        let res = p.backward_error(value, &x);
        if !(res <= 1e-9) {
            return Err(Error::Numeric(format!(
                "eigenpair {j} (mu = {value}) has relative residual {res:.3e}"
            )));
        }
        pairs.push(EigenPair { value, vector: x });
    }
    Ok(pairs)
}

fn bisect(p: &Pencil, j: usize, mut lo: f64, mut hi: f64) -> f64 {
    // invariant: count_below(lo) <= j < count_below(hi)
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 {
            break;
        }
        if p.count_below(mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_positive_definite(m: &SymTridiag) -> Result<()> {
    let mut d = 0.0;
    for i in 0..m.len() {
        d = if i == 0 {
            m.diag[0]
        } else {
            m.diag[i] - m.off[i - 1] * m.off[i - 1] / d
        };
        if !(d > 0.0) {
            return Err(Error::Numeric(format!(
                "mass matrix is not positive definite (pivot {i} = {d})"
            )));
        }
    }
    Ok(())
}

fn start_vector(n: usize, j: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895 + j as f64 * 0.37).sin())
        .collect()
}

fn normalize(m: &SymTridiag, x: &mut [f64]) {
    let nrm = m.quad(x).sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}

/// Positive trace value when the trace does not vanish, else positive largest entry.
fn fix_sign(x: &mut [f64]) {
    let big = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let last = *x.last().unwrap();
    let pivot = if last.abs() > 1e-8 * big {
        last
    } else {
        *x.iter().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap()
    };
    if pivot < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Pencil {
        Pencil {
            ground: 0.3,
            springs: vec![1.0, 1e6, 2.0, 1e9, 5.0],
            extra: SymTridiag {
                diag: vec![0.1, -0.2, 0.3, 0.0, 0.2, -1.0],
                off: vec![0.05, 0.0, -0.1, 0.2, 0.0],
            },
            mass: SymTridiag {
                diag: vec![2.0, 1.0, 3.0, 1.0, 2.0, 1.0],
                off: vec![0.5, 0.2, 0.1, 0.3, 0.4],
            },
        }
    }

    #[test]
    fn identity_pencil() {
        let id = SymTridiag::identity(6);
        let pairs = solve_pencil(&id, &id, 6).unwrap();
        assert!(pairs.iter().all(|p| (p.value - 1.0).abs() < 1e-13));
        for a in 0..6 {
            for b in 0..6 {
                let ip = id.bilinear(&pairs[a].vector, &pairs[b].vector);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-9, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn diagonal_pencil() {
        let k = SymTridiag {
            diag: vec![3.0, 1.0, 2.0],
            off: vec![0.0, 0.0],
        };
        let pairs = solve_pencil(&k, &SymTridiag::identity(3), 3).unwrap();
        for (p, w) in pairs.iter().zip([1.0, 2.0, 3.0]) {
            assert!((p.value - w).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite_mass() {
        let m = SymTridiag {
            diag: vec![1.0, -1.0],
            off: vec![0.0],
        };
        assert!(solve_pencil(&SymTridiag::identity(2), &m, 1).is_err());
    }

    #[test]
    fn spring_forms_match_assembled_matrix() {
        let p = chain();
        let k = p.stiffness();
        let x = [1.0, -0.5, 0.25, 2.0, 1.5, -1.0];
        let a = k.mul(&x);
        let b = p.k_mul(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6 * u.abs().max(1.0));
        }
        assert!((k.quad(&x) - p.k_quad(&x)).abs() < 1e-6 * k.quad(&x).abs());
    }

    #[test]
    fn shifted_solve_inverts() {
        let p = chain();
        let rhs = [1.0, -2.0, 0.3, 4.0, -1.0, 0.5];
        for shift in [0.0, 0.7, -0.4] {
            let x = p.shifted_solve(shift, &rhs);
            let kx = p.k_mul(&x);
            let mx = p.mass.mul(&x);
            let scale = p.stiffness().abs_mul(&x);
            for i in 0..6 {
                let r = kx[i] - shift * mx[i] - rhs[i];
                assert!(
                    r.abs() < 1e-13 * (scale[i] + 1.0),
                    "shift {shift} row {i}: {r}"
                );
            }
        }
    }

    #[test]
    fn inertia_matches_spring_free_form() {
        let p = chain();
        let q = Pencil::from_matrices(&p.stiffness(), &p.mass);
        for mu in [-3.0, -0.1, 0.05, 0.4, 2.0, 1e3, 1e7] {
            assert_eq!(p.count_below(mu), q.count_below(mu), "mu = {mu}");
        }
    }

    #[test]
    fn prefix_is_independent_of_count() {
        let k = SymTridiag {
            diag: (0..20).map(|i| 2.0 + i as f64 * 0.1).collect(),
            off: vec![-1.0; 19],
        };
        let m = SymTridiag {
            diag: vec![4.0; 20],
            off: vec![1.0; 19],
        };
        let a = solve_pencil(&k, &m, 3).unwrap();
        let b = solve_pencil(&k, &m, 20).unwrap();
        assert_eq!(a[..], b[..3]);
    }
}
