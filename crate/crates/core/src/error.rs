use thiserror::Error;

/// Errors raised by measure construction, matching, transport builders and
/// the spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("malformed cdf: {0}")]
    MalformedCdf(String),

    #[error("normality defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    NotNormal { defect: f64, tolerance: f64 },

    #[error("function `{name}` is not 1-Lipschitz: ratio {ratio:.6} on the probe grid")]
    NotLipschitz { name: String, ratio: f64 },

    #[error("epsilon {epsilon} too small: {reason}")]
    EpsilonTooSmall { epsilon: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("path construction failed after {attempts} attempts: {reason}")]
    ConstructionFailure { attempts: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
