use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{domain, Result};

/// Minimum number of interior nodes of an angular mesh.
pub const MIN_INTERIOR_NODES: usize = 32;

/// Polar-angle mesh on [0, pi/2], phi = 0 at the pole and phi = pi/2 on the flat boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularMesh {
    nodes: Vec<f64>,
    grading: f64,
}

impl AngularMesh {
    /// `count` nodes with phi_j = pi/2 (1 - (1 - j/(count-1))^grading), clustered toward pi/2.
    pub fn graded(count: usize, grading: f64) -> Result<Self> {
        if !(grading >= 1.0) || !grading.is_finite() {
            return domain(format!("grading exponent must be >= 1, got {grading}"));
        }
        if count < MIN_INTERIOR_NODES + 2 {
            return domain(format!(
                "an angular mesh needs at least {} nodes, got {count}",
                MIN_INTERIOR_NODES + 2
            ));
        }
        let last = (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count)
            .map(|j| FRAC_PI_2 * (1.0 - (1.0 - j as f64 / last).powf(grading)))
            .collect();
        nodes[0] = 0.0;
        nodes[count - 1] = FRAC_PI_2;
        Ok(Self { nodes, grading })
    }

    pub fn uniform(count: usize) -> Result<Self> {
        Self::graded(count, 1.0)
    }

    /// Mesh from explicit nodes (validated).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_INTERIOR_NODES + 2 {
            return domain("too few angular nodes");
        }
        if nodes[0] != 0.0 || nodes[nodes.len() - 1] != FRAC_PI_2 {
            return domain("angular mesh must start at 0 and end at pi/2");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("angular nodes must be strictly increasing");
        }
        Ok(Self {
            nodes,
            grading: f64::NAN,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    /// Piecewise-linear interpolation of nodal values at angle `phi`.
    pub fn interpolate(&self, values: &[f64], phi: f64) -> f64 {
        let idx = self
            .nodes
            .partition_point(|&x| x <= phi)
            .clamp(1, self.len() - 1);
        let (a, b) = (self.nodes[idx - 1], self.nodes[idx]);
        let t = ((phi - a) / (b - a)).clamp(0.0, 1.0);
        values[idx - 1] * (1.0 - t) + values[idx] * t
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&p| f(p)).collect()
    }
}
