//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("singular matrix: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    /// The binary search could not isolate a gradient change. This is the
    /// algorithm's own failure signal, not a numerical error.
    #[error("extraction failure: {0}")]
    ExtractionFailure(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("sign recovery error: {0}")]
    SignRecovery(String),

    #[error("ambiguous row match: {0}")]
    AmbiguousMatch(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short code, used in reports and logs to keep error classes apart.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Validation(_) => "validation",
            Error::Generation(_) => "generation",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::ExtractionFailure(_) => "extraction_failure",
            Error::Geometry(_) => "geometry",
            Error::SignRecovery(_) => "sign_recovery",
            Error::AmbiguousMatch(_) => "ambiguous_match",
            Error::Configuration(_) => "configuration",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
