use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration file or string could not be parsed or validated.
    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("invalid model specification `{spec}`: {reason}")]
    ModelSpec { spec: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Evaluation produced a non-finite value where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The input is degenerate for the requested computation (constant field,
    /// empty node set, all nodes critical, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("solver failure: {0}")]
    Solver(String),

    /// Shooting found no sign change of the boundary mismatch over the slope scan.
    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("bad grid file {path}: {reason}")]
    GridFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
