use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the analysis toolkit.
///
/// Variants split into validation failures (bad inputs, exit code 2 at the
/// command line) and numerical failures (exit code 3), see [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported unit conversion: {from} -> {to}")]
    UnsupportedUnits { from: String, to: String },

    #[error("insufficient samples: need {required}, got {available}")]
    InsufficientSamples { required: usize, available: usize },

    #[error("undersampled request: {0}")]
    Undersampled(String),

    #[error("quadrature did not converge (estimated relative error {rel_error:e})")]
    Quadrature { rel_error: f64 },

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("ringdown rejected: {0}")]
    Ringdown(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is numerical (convergence, quadrature) rather than
    /// a schema or precondition violation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::NonConvergence { .. } | Error::Ringdown(_) | Error::Degenerate(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid_input",
            Error::UnsupportedUnits { .. } => "unsupported_units",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::Undersampled(_) => "undersampled",
            Error::Quadrature { .. } => "quadrature_failure",
            Error::NonConvergence { .. } => "fit_failure",
            Error::Degenerate(_) => "degenerate_data",
            Error::Ringdown(_) => "ringdown_rejected",
            Error::Parse(_) => "parse_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "schema_violation",
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
