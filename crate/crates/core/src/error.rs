use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or parameter value violates its contract. `field` is a
    /// dotted path such as `noise.alpha`.
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("frequency {requested} Hz lies outside the resolvable band [{f_min} Hz, {f_max} Hz]")]
    FrequencyOutOfRange {
        requested: f64,
        f_min: f64,
        f_max: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("noise trace too short: {required} samples required, {available} available")]
    TraceTooShort { required: usize, available: usize },

    #[error("integration step too large: trace drift {drift:.3e} exceeds {bound:.1e} (reduce dt)")]
    StepTooLarge { drift: f64, bound: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("at least 2 curves are required, got {0}")]
    InsufficientCurves(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 2 for usage/config/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::GridMismatch(_)
            | Error::InsufficientCurves(_)
            | Error::TraceTooShort { .. } => 2,
            Error::FrequencyOutOfRange { .. }
            | Error::InsufficientData(_)
            | Error::StepTooLarge { .. }
            | Error::FitFailure(_) => 3,
        }
    }
}
