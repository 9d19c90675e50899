//! Cubic Hermite elements in u = ln r and banded symmetric solves.

use crate::quadrature::GaussRule;

/// Hermite shape functions on [0, 1] for a cell of length `h`, in dof order
/// (value left, log-derivative left, value right, log-derivative right).
/// Returns (values, d/du).
pub(crate) fn hermite(t: f64, h: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let v = [
        2.0 * t3 - 3.0 * t2 + 1.0,
        h * (t3 - 2.0 * t2 + t),
        -2.0 * t3 + 3.0 * t2,
        h * (t3 - t2),
    ];
    let d = [
        (6.0 * t2 - 6.0 * t) / h,
        3.0 * t2 - 4.0 * t + 1.0,
        (-6.0 * t2 + 6.0 * t) / h,
        3.0 * t2 - 2.0 * t,
    ];
    (v, d)
}

/// Symmetric banded matrix, lower band stored row-wise: `band[i][j] = A[i][i-j]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Banded {
    pub band: Vec<[f64; 4]>,
}

pub(crate) const HALF_BAND: usize = 3;

impl Banded {
    pub fn zeros(n: usize) -> Self {
        Self {
            band: vec![[0.0; 4]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.band.len()
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        if a - b > HALF_BAND {
            0.0
        } else {
            self.band[a][a - b]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        self.band[a][a - b] += v;
    }

    pub fn axpy(&self, c: f64, other: &Banded) -> Banded {
        Banded {
            band: self
                .band
                .iter()
                .zip(&other.band)
                .map(|(a, b)| {
                    [
                        a[0] + c * b[0],
                        a[1] + c * b[1],
                        a[2] + c * b[2],
                        a[3] + c * b[3],
                    ]
                })
                .collect(),
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] += self.band[i][0] * x[i];
            for j in 1..=HALF_BAND.min(i) {
                let a = self.band[i][j];
                y[i] += a * x[i - j];
                y[i - j] += a * x[i];
            }
        }
        y
    }

    /// |A| x, used for componentwise error bounds.
    pub fn abs_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] += self.band[i][0].abs() * x[i];
            for j in 1..=HALF_BAND.min(i) {
                let a = self.band[i][j].abs();
                y[i] += a * x[i - j];
                y[i - j] += a * x[i];
            }
        }
        y
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.mul(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Replace row and column `j` by the identity.
    pub fn pin(&mut self, j: usize) {
        let n = self.len();
        for i in j.saturating_sub(HALF_BAND)..=(j + HALF_BAND).min(n - 1) {
            if i != j {
                let (a, b) = if i >= j { (i, j) } else { (j, i) };
                self.band[a][a - b] = 0.0;
            }
        }
        self.band[j][0] = 1.0;
    }

    /// Banded Cholesky factor; `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<BandedCholesky> {
        let n = self.len();
        let mut l = vec![[0.0f64; 4]; n];
        for i in 0..n {
            for j in (0..=HALF_BAND.min(i)).rev() {
                // entry L[i][i-j]
                let col = i - j;
                let mut sum = self.band[i][j];
                for k in 1..=HALF_BAND {
                    if k > col || j + k > HALF_BAND {
                        break;
                    }
                    // L[i][col-k] * L[col][col-k]
                    sum -= l[i][j + k] * l[col][k];
                }
                if j == 0 {
                    if !(sum > 0.0) {
                        return None;
                    }
                    l[i][0] = sum.sqrt();
                } else {
                    l[i][j] = sum / l[col][0];
                }
            }
        }
        Some(BandedCholesky { l })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BandedCholesky {
    l: Vec<[f64; 4]>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for j in 1..=HALF_BAND.min(i) {
                v -= self.l[i][j] * y[i - j];
            }
            y[i] = v / self.l[i][0];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for j in 1..=HALF_BAND {
                if i + j >= n {
                    break;
                }
                v -= self.l[i + j][j] * y[i + j];
            }
            y[i] = v / self.l[i][0];
        }
        y
    }
}

/// Assemble the radial Hermite matrix for weight `weight(u)` with either the
/// derivative-derivative (`grad = true`) or value-value pairing.
#[allow(clippy::needless_range_loop)]
pub(crate) fn assemble(
    u0: f64,
    h: f64,
    cells: usize,
    rule: &GaussRule,
    grad: bool,
    weight: impl Fn(f64) -> f64,
) -> Banded {
    let mut a = Banded::zeros(2 * (cells + 1));
    for c in 0..cells {
        let ua = u0 + c as f64 * h;
        let mut local = [[0.0; 4]; 4];
        for (x, w) in rule.mapped(0.0, 1.0) {
            let (v, d) = hermite(x, h);
            let phi = if grad { d } else { v };
            let ww = w * h * weight(ua + x * h);
            for p in 0..4 {
                for q in 0..=p {
                    local[p][q] += ww * phi[p] * phi[q];
                }
            }
        }
        let base = 2 * c;
        for p in 0..4 {
            for q in 0..=p {
                a.add(base + p, base + q, local[p][q]);
            }
        }
    }
    a
}
