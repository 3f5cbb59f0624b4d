use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A calibration bracket is non-positive; the formula needs a smaller epsilon.
    #[error("calibration domain: {reason}{}", max_epsilon.map(|e| format!(" (admissible for epsilon < {e:.6e})")).unwrap_or_default())]
    CalibrationDomain {
        reason: String,
        max_epsilon: Option<f64>,
    },

    /// Inconsistent or unsupported configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A run would exceed a configured resource cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Not enough usable data for an estimate.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// The requested combination is not supported by the selected model.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
