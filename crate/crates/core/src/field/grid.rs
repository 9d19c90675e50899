use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::sphere::AngularMesh;

/// Geometric radial rings r_i = R rho^{m-i}, i = 0..=m, times an angular mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfDiskGrid {
    outer_radius: f64,
    inner_radius: f64,
    cells: usize,
    pub angular: AngularMesh,
}

impl HalfDiskGrid {
    /// `cells` radial cells between `inner_radius` and `outer_radius`; the
    /// rings must span at least four decades.
    pub fn new(
        outer_radius: f64,
        inner_radius: f64,
        cells: usize,
        angular: AngularMesh,
    ) -> Result<Self> {
        if !(outer_radius > 0.0 && outer_radius.is_finite()) {
            return domain(format!("outer radius must be positive, got {outer_radius}"));
        }
        if !(inner_radius > 0.0) || inner_radius / outer_radius > 1e-4 * (1.0 + 1e-12) {
            return domain(format!(
                "r_min/R must be at most 1e-4 (got {inner_radius}/{outer_radius})"
            ));
        }
        if cells < 8 {
            return domain(format!("need at least 8 radial cells, got {cells}"));
        }
        Ok(Self {
            outer_radius,
            inner_radius,
            cells,
            angular,
        })
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Number of radial cells m (there are m + 1 rings).
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn rings(&self) -> usize {
        self.cells + 1
    }

    /// Step in log-radius between consecutive rings.
    pub fn log_step(&self) -> f64 {
        (self.outer_radius / self.inner_radius).ln() / self.cells as f64
    }

    /// Geometric ratio rho = r_{i}/r_{i+1}.
    pub fn ratio(&self) -> f64 {
        (-self.log_step()).exp()
    }

    pub fn log_radius(&self, i: usize) -> f64 {
        self.outer_radius.ln() - (self.cells - i) as f64 * self.log_step()
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i == self.cells {
            self.outer_radius
        } else if i == 0 {
            self.inner_radius
        } else {
            self.log_radius(i).exp()
        }
    }

    /// All ring radii, increasing.
    pub fn radii(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.radius(i)).collect()
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.inner_radius * (1.0 - 1e-12) && r <= self.outer_radius * (1.0 + 1e-12)
    }

    /// Cell index and local coordinate t in [0, 1] of log-radius `u`.
    pub(crate) fn locate(&self, u: f64) -> (usize, f64) {
        let x = (u - self.inner_radius.ln()) / self.log_step();
        let j = (x.floor().max(0.0) as usize).min(self.cells - 1);
        (j, (x - j as f64).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_rings() {
        let g = HalfDiskGrid::new(2.0, 2e-4, 40, AngularMesh::graded(40, 3.0).unwrap()).unwrap();
        let r = g.radii();
        assert_eq!(r.len(), 41);
        assert_eq!(r[0], 2e-4);
        assert_eq!(r[40], 2.0);
        for w in r.windows(2) {
            assert!((w[0] / w[1] - g.ratio()).abs() < 1e-12);
        }
        let (j, t) = g.locate(g.log_radius(7) + 0.25 * g.log_step());
        assert_eq!(j, 7);
        assert!((t - 0.25).abs() < 1e-9);
    }

    #[test]
    fn needs_four_decades() {
        let mesh = AngularMesh::graded(40, 3.0).unwrap();
        assert!(HalfDiskGrid::new(1.0, 1e-3, 40, mesh.clone()).is_err());
        assert!(HalfDiskGrid::new(1.0, 1e-4, 40, mesh).is_ok());
    }
}
