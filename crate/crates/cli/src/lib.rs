//! Command-line front end: problem configuration, coefficient expressions and
//! the `mesh`, `solve`, `converge`, `certify`, `dec-check` and `compare-fem`
//! commands.

pub mod commands;
pub mod config;
pub mod expr;

use mfd_core::MfdError;
use thiserror::Error;

pub use commands::{run, Cli};

/// Exit status for a completed run.
pub const EXIT_OK: i32 = 0;
/// A certificate or check ran but did not hold.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Invalid input: configuration, expressions, meshes, files.
pub const EXIT_VALIDATION: i32 = 2;
/// The linear solver failed.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Core(#[from] MfdError),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(MfdError::SingularMatrix(_) | MfdError::NoConvergence { .. }) => EXIT_SOLVER,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}
