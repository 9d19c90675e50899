use serde::{Deserialize, Serialize};

use super::mesh::AngularMesh;
use super::pencil::Pencil;
use super::tridiag::SymTridiag;
use crate::closed_forms::ProblemParams;
use crate::quadrature::GaussRule;

/// Quadratic forms of one harmonic-degree block, stored over all mesh nodes.
///
/// For a profile P (nodal values) and psi = P(phi) Y_ell(omega):
/// `mass.quad(P)` is the weighted L2 norm of psi on the half sphere,
/// `energy(P)` its weighted Dirichlet energy and `P[last]^2` its squared
/// trace norm on S^{N-1}. The gradient part is kept as one spring constant
/// per cell so energies never cancel large entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularForms {
    pub ell: u32,
    pub mass: SymTridiag,
    /// Integral of the weight times |P'|^2 per unit jump, one entry per cell.
    pub springs: Vec<f64>,
    /// ell(ell+N-2) times the sin^{N-3}-weighted mass.
    pub potential: SymTridiag,
    /// lambda kappa_s, the weight of the trace term.
    pub trace_coupling: f64,
    /// First free node: 1 when the pole condition P(0) = 0 is imposed.
    pub first_dof: usize,
}

/// Assemble the P1 forms for degree `ell` with 8-point Gauss on each cell.
pub fn assemble_sl(params: &ProblemParams, ell: u32, mesh: &AngularMesh) -> AngularForms {
    assemble_with_rule(params, ell, mesh, &GaussRule::legendre(8))
}

pub(crate) fn assemble_with_rule(
    params: &ProblemParams,
    ell: u32,
    mesh: &AngularMesh,
    rule: &GaussRule,
) -> AngularForms {
    let n = mesh.len();
    let (nn, s) = (params.n as i32, params.s);
    let ang = ell as f64 * (ell as f64 + params.n as f64 - 2.0);
    let mut mass = SymTridiag::zeros(n);
    let mut potential = SymTridiag::zeros(n);
    let mut springs = vec![0.0; n - 1];
    for (c, (a, b)) in mesh.cells().enumerate() {
        let h = b - a;
        let (mut m00, mut m01, mut m11, mut k) = (0.0, 0.0, 0.0, 0.0);
        let (mut v00, mut v01, mut v11) = (0.0, 0.0, 0.0);
        for (phi, w) in rule.mapped(a, b) {
            let cw = phi.cos().powf(1.0 - 2.0 * s);
            let sn = phi.sin();
            let wa = cw * sn.powi(nn - 1);
            let (l, r) = ((b - phi) / h, (phi - a) / h);
            m00 += w * wa * l * l;
            m01 += w * wa * l * r;
            m11 += w * wa * r * r;
            k += w * wa / (h * h);
            if ang != 0.0 {
                let wb = cw * sn.powi(nn - 3);
                v00 += w * wb * l * l;
                v01 += w * wb * l * r;
                v11 += w * wb * r * r;
            }
        }
        mass.diag[c] += m00;
        mass.diag[c + 1] += m11;
        mass.off[c] += m01;
        springs[c] = k;
        potential.diag[c] += ang * v00;
        potential.diag[c + 1] += ang * v11;
        potential.off[c] += ang * v01;
    }
    AngularForms {
        ell,
        mass,
        springs,
        potential,
        trace_coupling: params.lambda * params.kappa(),
        first_dof: usize::from(ell > 0),
    }
}

impl AngularForms {
    pub fn nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn trace_index(&self) -> usize {
        self.nodes() - 1
    }

    /// Weighted Dirichlet energy of P Y_ell (no trace term).
    pub fn energy(&self, p: &[f64]) -> f64 {
        let grad: f64 = self
            .springs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (p[i + 1] - p[i]).powi(2))
            .sum();
        grad + self.potential.quad(p)
    }

    /// Energy bilinear form.
    pub fn energy_bilinear(&self, p: &[f64], q: &[f64]) -> f64 {
        let grad: f64 = self
            .springs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (p[i + 1] - p[i]) * (q[i + 1] - q[i]))
            .sum();
        grad + self.potential.bilinear(p, q)
    }

    /// Assembled stiffness over all nodes, without the trace term.
    pub fn stiffness(&self) -> SymTridiag {
        let mut k = self.potential.clone();
        for (i, &c) in self.springs.iter().enumerate() {
            k.diag[i] += c;
            k.diag[i + 1] += c;
            k.off[i] -= c;
        }
        k
    }

    /// Stiffness including the Robin trace term, over all nodes.
    pub fn k_lambda(&self) -> SymTridiag {
        let mut k = self.stiffness();
        let t = self.trace_index();
        k.diag[t] -= self.trace_coupling;
        k
    }

    /// The pencil (K, M) restricted to the free nodes, with springs kept apart.
    pub fn pencil(&self) -> Pencil {
        let f = self.first_dof;
        let mut extra = self.potential.tail(f);
        let last = extra.len() - 1;
        extra.diag[last] -= self.trace_coupling;
        Pencil {
            ground: if f > 0 { self.springs[f - 1] } else { 0.0 },
            springs: self.springs[f..].to_vec(),
            extra,
            mass: self.mass.tail(f),
        }
    }

    /// Q(psi, psi): energy minus the lambda-weighted trace term.
    pub fn q_form(&self, p: &[f64]) -> f64 {
        self.energy(p) - self.trace_coupling * p[self.trace_index()].powi(2)
    }

    pub fn norm2(&self, p: &[f64]) -> f64 {
        self.mass.quad(p)
    }

    /// Embed a free-node vector into a full nodal vector.
    pub fn embed(&self, dofs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.first_dof];
        v.extend_from_slice(dofs);
        v
    }
}
