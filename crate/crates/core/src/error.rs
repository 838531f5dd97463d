use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `key` names the offending field.
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("dimension mismatch: expected {expected} modes, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("could not place {requested} distinct coherent states within {attempts} draws (placed {placed})")]
    SamplingExhausted {
        requested: usize,
        placed: usize,
        attempts: usize,
    },

    #[error("overlap matrix numerically singular (condition estimate {condition:.3e}, retained rank {rank} of {size})")]
    Singular {
        condition: f64,
        rank: usize,
        size: usize,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("step size underflow at t = {time} (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("{quantity} deviates by {deviation:.3e}, tolerance {tolerance:.3e}")]
    ToleranceExceeded {
        quantity: String,
        deviation: f64,
        tolerance: f64,
    },

    /// A long run was requested without explicit confirmation.
    #[error("`{0}` is marked long_run; pass --confirm-long-run to start it")]
    LongRunNotConfirmed(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid { .. } | Error::Parse(_) => "validation",
            Error::DimensionMismatch { .. } => "dimension",
            Error::SamplingExhausted { .. } => "sampling",
            Error::Singular { .. } | Error::Eigen(_) => "linear_algebra",
            Error::NonFinite { .. } | Error::StepUnderflow { .. } => "propagation",
            Error::Unsupported(_) => "unsupported",
            Error::ToleranceExceeded { .. } => "tolerance",
            Error::LongRunNotConfirmed(_) => "confirmation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
