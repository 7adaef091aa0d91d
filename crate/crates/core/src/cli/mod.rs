//! Library side of the `gksop` command line tool.
//!
//! The binary only parses arguments; everything that decides what gets
//! computed, written or reported lives here so it can be tested directly.

mod spec;
mod sweep;
mod validate;

pub use spec::{LawName, MethodColumn, PointSpec, SweepSpec, SweptVariable};
pub use sweep::{columns_for, evaluate_point, run_sweep, write_csv, Column, PointFailure, SweepOutcome, SweepRow};
pub use validate::{run_checks, CheckResult, FaultInjection, ValidationLevel};

use crate::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Validation or configuration error.
pub const EXIT_CONFIG: i32 = 1;
/// Numerical failure during evaluation.
pub const EXIT_NUMERICAL: i32 = 2;
/// One or more self-checks failed.
pub const EXIT_CHECKS: i32 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("check suite failed: {0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::ChecksFailed(_) => EXIT_CHECKS,
        }
    }

    /// Classifies a core error; `context` echoes the offending configuration.
    pub fn from_core(err: &Error, context: &str) -> Self {
        match err {
            Error::InvalidArgument(_) | Error::Domain(_) | Error::Unsupported(_) => {
                CliError::Config(format!("{err} [{context}]"))
            }
            _ => CliError::Numerical(format!("{err} [{context}]")),
        }
    }
}
