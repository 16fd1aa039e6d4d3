use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the region where the construction is valid.
    /// The message names the violated constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    /// A quadrature or ratio produced a non-finite value, which usually means
    /// the truncation box is too small for the growth of the integrand.
    #[error("non-finite value in {what}: {detail}")]
    NonFinite { what: String, detail: String },

    #[error("test function support violates the box: {0}")]
    SupportViolation(String),

    #[error("{what} is unbounded on the verification grid (max {value:e} at {location:?})")]
    Unbounded {
        what: String,
        value: f64,
        location: Vec<f64>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
