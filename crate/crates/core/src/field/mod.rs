//! Fields on the half ball, their weighted integrals and the linear and
//! semilinear extension solvers.

mod export;
mod extension;
mod grid;
mod identities;
pub(crate) mod radial;
mod solve;

pub use export::{field_csv, read_afld, write_afld};
pub use extension::{
    BallIntegrals, CoreTerm, ExtensionField, FSpec, FieldIntegrator, HSpec, SphereIntegrals,
};
pub use grid::HalfDiskGrid;
pub use identities::{
    frequency, h_prime_identity_residual, pohozaev_residual, pohozaev_terms, weighted_l2_distance,
    D_of_r, H_of_r,
};
pub use solve::{
    solve_linear, solve_semilinear, BoundaryDatum, ExtensionSolver, LinearReport, PicardReport,
};
