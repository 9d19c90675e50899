use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::forms::{assemble_sl, AngularForms};
use super::harmonics::multiplicity;
use super::mesh::AngularMesh;
use super::pencil::solve_spring_pencil;
use crate::closed_forms::ProblemParams;
use crate::error::{domain, Error, Result};

/// One eigenpair (mu, P) of the degree-`ell` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularMode {
    pub ell: u32,
    /// 1-based position inside the degree block.
    pub index_within_ell: usize,
    pub mu: f64,
    /// Nodal values of P, normalized in the weighted L2 norm.
    pub profile: Vec<f64>,
    /// P(pi/2).
    pub trace_value: f64,
    pub multiplicity: usize,
}

/// Eigenpairs of one degree block, the diagonalizing basis used by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularBasis {
    pub forms: AngularForms,
    pub values: Vec<f64>,
    /// Full nodal vectors, M-orthonormal.
    pub vectors: Vec<Vec<f64>>,
}

impl AngularBasis {
    /// Lowest `count` eigenpairs of the degree-`ell` pencil.
    pub fn new(params: &ProblemParams, mesh: &AngularMesh, ell: u32, count: usize) -> Result<Self> {
        let forms = assemble_sl(params, ell, mesh);
        let dofs = mesh.len() - forms.first_dof;
        if count > dofs {
            return domain(format!(
                "mesh too coarse: {count} modes requested for degree {ell} but only {dofs} \
                 degrees of freedom; refine the angular mesh"
            ));
        }
        let pairs = solve_spring_pencil(&forms.pencil(), count)?;
        let half = params.half_gap();
        let mut values = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for p in pairs {
            if !(p.value > -half * half) {
                return Err(Error::Numeric(format!(
                    "eigenvalue {} of degree {ell} falls below the Hardy threshold",
                    p.value
                )));
            }
            values.push(p.value);
            vectors.push(forms.embed(&p.vector));
        }
        Ok(Self {
            forms,
            values,
            vectors,
        })
    }

    /// Complete basis of the block (one vector per free node).
    pub fn full(params: &ProblemParams, mesh: &AngularMesh, ell: u32) -> Result<Self> {
        let count = mesh.len() - usize::from(ell > 0);
        Self::new(params, mesh, ell, count)
    }

    pub fn ell(&self) -> u32 {
        self.forms.ell
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weighted inner products of `profile` with every basis vector.
    pub fn coefficients(&self, profile: &[f64]) -> Vec<f64> {
        let mp = self.forms.mass.mul(profile);
        self.vectors
            .iter()
            .map(|v| v.iter().zip(&mp).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Sum of coefficient-weighted basis vectors.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.forms.nodes()];
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            if *c != 0.0 {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
        }
        out
    }

    pub fn trace_values(&self) -> Vec<f64> {
        let t = self.forms.trace_index();
        self.vectors.iter().map(|v| v[t]).collect()
    }
}

/// Merged spectrum over degrees 0..=ell_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub params: ProblemParams,
    pub mesh: AngularMesh,
    /// Distinct (ell, index) entries sorted by mu, ties broken by ell.
    pub modes: Vec<AngularMode>,
}

impl Spectrum {
    pub fn new(
        params: &ProblemParams,
        mesh: &AngularMesh,
        ell_max: u32,
        per_ell: usize,
    ) -> Result<Self> {
        if per_ell == 0 {
            return domain("per_ell must be at least 1");
        }
        let ells: Vec<u32> = (0..=ell_max)
            .filter(|&l| multiplicity(params.n, l) > 0)
            .collect();
        let blocks: Vec<Result<AngularBasis>> = ells
            .par_iter()
            .map(|&l| AngularBasis::new(params, mesh, l, per_ell))
            .collect();
        let mut modes = Vec::new();
        for block in blocks {
            let block = block?;
            let mult = multiplicity(params.n, block.ell());
            let t = block.forms.trace_index();
            for (i, (mu, v)) in block.values.iter().zip(&block.vectors).enumerate() {
                modes.push(AngularMode {
                    ell: block.ell(),
                    index_within_ell: i + 1,
                    mu: *mu,
                    trace_value: v[t],
                    profile: v.clone(),
                    multiplicity: mult,
                });
            }
        }
        modes.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.ell.cmp(&b.ell)));
        Ok(Self {
            params: *params,
            mesh: mesh.clone(),
            modes,
        })
    }

    pub fn mode(&self, ell: u32, index_within_ell: usize) -> Option<&AngularMode> {
        self.modes
            .iter()
            .find(|m| m.ell == ell && m.index_within_ell == index_within_ell)
    }

    /// Modes of one degree in increasing order.
    pub fn block(&self, ell: u32) -> Vec<&AngularMode> {
        let mut b: Vec<&AngularMode> = self.modes.iter().filter(|m| m.ell == ell).collect();
        b.sort_by_key(|m| m.index_within_ell);
        b
    }

    /// The enumeration mu_1 <= mu_2 <= ... with each mode repeated by multiplicity.
    /// Yields (k, mode, copy) with k 1-based.
    pub fn enumerate(&self) -> impl Iterator<Item = (usize, &AngularMode, usize)> {
        self.modes
            .iter()
            .flat_map(|m| (0..m.multiplicity).map(move |c| (m, c)))
            .enumerate()
            .map(|(i, (m, c))| (i + 1, m, c))
    }

    /// Number of eigenvalues counted with multiplicity.
    pub fn total_count(&self) -> usize {
        self.modes.iter().map(|m| m.multiplicity).sum()
    }

    /// The k-th eigenvalue (1-based, with multiplicity).
    pub fn mu_k(&self, k: usize) -> Option<f64> {
        self.enumerate()
            .find(|(i, _, _)| *i == k)
            .map(|(_, m, _)| m.mu)
    }

    /// Distinct eigenvalues with accumulated multiplicities; values closer than
    /// `tol` (relative to 1 + |mu|) are merged.
    pub fn distinct_values(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for m in &self.modes {
            match out.last_mut() {
                Some((mu, mult)) if (m.mu - *mu).abs() <= tol * (1.0 + mu.abs()) => {
                    *mult += m.multiplicity
                }
                _ => out.push((m.mu, m.multiplicity)),
            }
        }
        out
    }

    /// CSV with columns ell, index, mu, multiplicity, trace_value.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ell,index,mu,multiplicity,trace_value\n");
        for m in &self.modes {
            let _ = writeln!(
                s,
                "{},{},{:.17e},{},{:.17e}",
                m.ell, m.index_within_ell, m.mu, m.multiplicity, m.trace_value
            );
        }
        s
    }
}

/// Q(psi, psi) / ||psi||^2 for psi = P Y_ell, with the quadrature of [`assemble_sl`].
pub fn rayleigh_quotient(
    params: &ProblemParams,
    mesh: &AngularMesh,
    profile: &[f64],
    ell: u32,
) -> Result<f64> {
    let forms = assemble_sl(params, ell, mesh);
    let den = forms.norm2(profile);
    if !(den > 0.0) {
        return domain("Rayleigh quotient of a vanishing profile");
    }
    Ok(forms.q_form(profile) / den)
}

/// Both sides of the half-sphere trace inequality
/// kappa_s Lambda ||psi||^2_{S^{N-1}} <= ((N-2s)/2)^2 ||psi||^2 + ||grad psi||^2.
pub fn trace_inequality_check(
    params: &ProblemParams,
    mesh: &AngularMesh,
    profile: &[f64],
    ell: u32,
) -> (f64, f64) {
    let forms = assemble_sl(params, ell, mesh);
    let h = params.half_gap();
    let lhs = params.kappa() * params.hardy_constant() * profile[forms.trace_index()].powi(2);
    let rhs = h * h * forms.norm2(profile) + forms.energy(profile);
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_spectrum_n3() {
        let p = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let mesh = AngularMesh::graded(257, 3.0).unwrap();
        let sp = Spectrum::new(&p, &mesh, 2, 2).unwrap();
        let first = &sp.modes[0];
        assert_eq!((first.ell, first.multiplicity), (0, 1));
        assert!(first.mu.abs() < 1e-8);
        let second = &sp.modes[1];
        assert_eq!((second.ell, second.multiplicity), (1, 3));
        assert!((second.mu - 3.0).abs() < 1e-3);
        assert!(sp.modes.windows(2).all(|w| w[0].mu <= w[1].mu));
        assert_eq!(sp.mu_k(4), Some(second.mu));
    }

    #[test]
    fn normalization_and_pole_condition() {
        let p = ProblemParams::new(2, 0.3, 0.1).unwrap();
        let mesh = AngularMesh::graded(80, 3.0).unwrap();
        let sp = Spectrum::new(&p, &mesh, 3, 3).unwrap();
        for m in &sp.modes {
            let f = assemble_sl(&p, m.ell, &mesh);
            assert!((f.norm2(&m.profile) - 1.0).abs() < 1e-8);
            if m.ell > 0 {
                assert_eq!(m.profile[0], 0.0);
            }
        }
    }

    #[test]
    fn coarse_mesh_reports_refinement() {
        let p = ProblemParams::new(3, 0.5, 0.0).unwrap();
        let mesh = AngularMesh::graded(40, 3.0).unwrap();
        let err = Spectrum::new(&p, &mesh, 1, 45).unwrap_err();
        assert!(err.to_string().contains("refine"));
    }

    #[test]
    fn rayleigh_of_constant() {
        let p = ProblemParams::new(3, 0.5, 0.4).unwrap();
        let mesh = AngularMesh::graded(64, 3.0).unwrap();
        let ones = vec![1.0; 64];
        let rq = rayleigh_quotient(&p, &mesh, &ones, 0).unwrap();
        // ||1||^2 = pi/4 for N = 3, s = 1/2
        let want = -0.4 * p.kappa() / std::f64::consts::FRAC_PI_4;
        assert!((rq - want).abs() < 1e-9);
        assert!(rayleigh_quotient(&p, &mesh, &vec![0.0; 64], 0).is_err());
    }
}
