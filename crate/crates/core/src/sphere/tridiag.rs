use serde::{Deserialize, Serialize};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            diag: vec![1.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.diag[i] * x[i] * y[i];
        }
        for i in 0..n.saturating_sub(1) {
            acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
        }
        acc
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// self + c * other
    pub fn axpy(&self, c: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + c * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    /// Principal submatrix on indices `start..`.
    pub fn tail(&self, start: usize) -> SymTridiag {
        SymTridiag {
            diag: self.diag[start..].to_vec(),
            off: self.off[start.min(self.off.len())..].to_vec(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.off)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Componentwise magnitude product |self| |x|.
    pub fn abs_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = (self.diag[i] * x[i]).abs();
                if i > 0 {
                    v += (self.off[i - 1] * x[i - 1]).abs();
                }
                if i + 1 < n {
                    v += (self.off[i] * x[i + 1]).abs();
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SymTridiag {
        SymTridiag {
            diag: vec![4.0, 5.0, 6.0, 7.0, 3.0],
            off: vec![1.0, -2.0, 0.5, 3.0],
        }
    }

    #[test]
    fn bilinear_matches_mul() {
        let k = sample();
        let x = [1.0, 2.0, -1.0, 0.5, 3.0];
        let y = [0.2, -1.0, 4.0, 1.0, 1.0];
        let direct: f64 = k.mul(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((k.bilinear(&x, &y) - direct).abs() < 1e-12);
    }
}
