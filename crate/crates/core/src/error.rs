use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("sphere heat kernel requested at t = {t} below the series floor {floor}")]
    TooSmallTime { t: f64, floor: f64 },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation not supported on this space: {0}")]
    Unsupported(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("potential is not in the Kato class: {0}")]
    NotKato(String),

    #[error("divergent quantity: {0}")]
    Divergent(String),

    #[error("index out of range: {index} (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}
