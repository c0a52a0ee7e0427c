use thiserror::Error;

/// Errors produced by the model, estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffusionError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("singular normal matrix: covariance unavailable ({0})")]
    Singular(String),

    #[error("model rejected: {0}")]
    Rejected(String),
}

pub type Result<T, E = DiffusionError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(DiffusionError::Domain(msg.into()))
}
