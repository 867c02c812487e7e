use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("logical index {0} out of range 0..4")]
    IndexOutOfRange(usize),

    #[error("gate time undefined: g1*g2 = {0} must be positive")]
    UndefinedGateTime(f64),

    #[error("weak-field approximation violated: |alpha| = {0} exceeds {1}")]
    ApproximationDomain(f64, f64),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),
}
