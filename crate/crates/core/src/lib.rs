#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod almgren;
pub mod closed_forms;
pub mod error;
pub mod field;
pub mod fourier;
pub mod inequality;
pub mod quadrature;
pub mod runner;
pub mod sphere;

pub use closed_forms::{ExponentPair, ProblemParams};
pub use error::{Error, Result};
