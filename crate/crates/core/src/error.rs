use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}: expected 3, 4 or 5")]
    UnsupportedDimension(usize),
    #[error("non-positive radius {0}")]
    NonPositiveRadius(f64),
    #[error("grid needs at least 8 cells, got {0}")]
    TooFewCells(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has {got} samples, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid exponent p = {0}: need p >= 1")]
    InvalidExponent(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("CFL number {cfl} exceeds the stable limit {limit} for d = {d}")]
    CflViolation { cfl: f64, limit: f64, d: usize },
    #[error("domain radius {r_max} too small: need at least {required} for finite-speed containment")]
    DomainTooSmall { r_max: f64, required: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("too few samples: {got} (need {need})")]
    TooFewSamples { got: usize, need: usize },
    #[error("hypothesis not satisfied: {0}")]
    HypothesisNotSatisfied(String),
    #[error("empty time window")]
    EmptyWindow,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
