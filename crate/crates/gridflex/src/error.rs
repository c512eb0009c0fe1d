//! Crate-wide error type.

use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's preconditions.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An input file could not be parsed. Lines are 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// A series failed range or ramp validation. Indices are 0-based.
    #[error("validation failed at index {index}: {message}")]
    Validation { index: usize, message: String },
    /// The model instance admits no solution.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The scenario configuration is malformed or references missing files.
    #[error("config error: {0}")]
    Config(String),
    /// A required prior output is absent or stale.
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 usage/config, 3 missing inputs,
    /// 4 infeasible model, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Config(_) => 2,
            Error::MissingInput(_) => 3,
            Error::Infeasible(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
