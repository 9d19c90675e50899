//! Weighted eigenproblem on the half sphere, reduced by separation of
//! variables to one singular Sturm-Liouville pencil per harmonic degree.

mod forms;
mod harmonics;
mod mesh;
mod pencil;
mod spectrum;
mod tridiag;

pub use forms::{assemble_sl, AngularForms};
pub use harmonics::{harmonic_lq_norm, multiplicity};
pub use mesh::{AngularMesh, MIN_INTERIOR_NODES};
pub use pencil::{solve_pencil, solve_spring_pencil, EigenPair, Pencil};
pub use spectrum::{
    rayleigh_quotient, trace_inequality_check, AngularBasis, AngularMode, Spectrum,
};
pub use tridiag::SymTridiag;
