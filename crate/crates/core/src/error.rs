use thiserror::Error;

/// Errors raised by the operator algebra, the comparison analysis and the
/// protocol simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid arguments: {0}")]
    InvalidArguments(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A class claimed as conclusive has nonzero probability when the
    /// devices are equal.
    #[error("no-error condition violated for class {class}: probability {probability:e} under equal devices")]
    Unambiguity { class: String, probability: f64 },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
