use thiserror::Error;

/// Errors raised by the numerical routines and the case runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the admissible range of the problem.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine broke down (loss of definiteness, residual too large, ...).
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// An analysis was asked of data that cannot support it (vanishing field, flat data).
    #[error("integrity check failed: {0}")]
    Integrity(String),
    /// An iteration stopped before meeting its tolerance.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },
    /// A configuration file failed validation; every violation is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    /// A pipeline stage failed.
    #[error("stage {stage} failed: {source}")]
    Stage { stage: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status: 1 for invalid input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Io(_) => 1,
            Error::Numeric(_) | Error::Integrity(_) | Error::Convergence { .. } => 2,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
