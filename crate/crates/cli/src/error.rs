use std::path::{Path, PathBuf};

use rpca_core::RpcaError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed input file.
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
    /// Outputs were written, but the stopping rule was not met.
    #[error("solver stopped after {iterations} iterations with relative residual {residual:.3e} (tol {tol:.1e})")]
    NotConverged { iterations: usize, residual: f64, tol: f64 },
    #[error(transparent)]
    Solver(#[from] RpcaError),
}

impl CliError {
    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input { path: path.to_path_buf(), message: message.into() }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            // Bad parameter values reach the solver straight from the flags.
            CliError::Solver(RpcaError::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Input { .. } => EXIT_INPUT,
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            CliError::Output { .. } | CliError::Solver(_) => EXIT_FAILURE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
