use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller violated a documented precondition.
    #[error("misuse: {0}")]
    Misuse(String),

    /// Requested grid or rule exceeds the configured resource cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("singular evaluation at {point:?}: {reason}")]
    Singularity { point: Vec<f64>, reason: String },

    #[error("parameter outside the admissible domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("integrand not integrable: {0}")]
    Integrability(String),

    #[error("input rejected: {0}")]
    Rejected(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
