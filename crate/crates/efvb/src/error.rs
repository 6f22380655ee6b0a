//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter vector lies outside the model's constrained domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// Dimension mismatch between inputs.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The kernel coefficients imply a non-positive-definite conditional
    /// precision at time `t` (1-based).
    #[error("state approximation degenerate at t = {t}: implied precision not positive definite")]
    CalibrationDegeneracy { t: usize },

    /// A covariance or precision matrix failed to factorize.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The requested model/method combination is not supported.
    #[error("unsupported capability: {0}")]
    Capability(String),

    /// Unknown model name in the registry.
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    /// Configuration problem.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
