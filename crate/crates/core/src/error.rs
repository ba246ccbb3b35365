use thiserror::Error;

use crate::solve::SolveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called outside its documented domain of validity.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cell width {h} is too coarse: {reason}")]
    TooCoarse { h: f64, reason: String },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} is not inside the domain")]
    Exterior { point: [f64; 3] },

    #[error("no interior cell available for a corkscrew point at Q={q:?}, r={r}")]
    NoCorkscrew { q: [f64; 3], r: f64 },

    #[error(transparent)]
    Solve(#[from] SolveError),

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("flux curve does not span the required range: {0}")]
    InsufficientSpan(String),

    #[error("intermediate range is empty: {0}")]
    EmptyIntermediateRange(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
