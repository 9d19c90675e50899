//! Configuration-driven orchestration of the numerical stages.

pub mod acceptance;
mod config;
mod run;

pub use config::{
    parse_config, validate, BoundarySpec, CaseConfig, Coupling, GridSpec, RunSettings, Stage,
};
pub use run::{
    boundary_datum, run_case, run_case_in_memory, run_cases, write_artifacts, write_atomic,
    AlmgrenSummary, CaseRun, FourierSummary, InequalitySummary, RunSummary, SolveSummary,
    DOUBLING_SIGMA,
};
