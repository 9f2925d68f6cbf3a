use thiserror::Error;

/// Errors raised by model construction, operators and the verifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("metric is not positive-definite at sample {index} (x = {coords:?}, min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite {
        index: usize,
        coords: Vec<f64>,
        min_eigenvalue: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported backend: {0}")]
    Unsupported(String),

    #[error("field does not belong to this context (field context {field}, expected {expected})")]
    ForeignField { field: u64, expected: u64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        worst_residual: f64,
    },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}
