use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Two distinct particles share a position, where the singular weight is undefined.
    #[error("particles {i} and {j} collide (gap {gap:e})")]
    Collision { i: usize, j: usize, gap: f64 },

    #[error("state became non-finite at t = {time}")]
    NumericalBlowup { time: f64 },

    #[error("measure weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("assignment size {n} exceeds cap {cap}")]
    SizeCapExceeded { n: usize, cap: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("natural-velocity marginal has zero total mass")]
    DegenerateSupport,

    #[error("slice {node} lost monotonicity at level {level} (t = {time}, overlap {overlap:e})")]
    MonotonicityViolation {
        node: usize,
        level: usize,
        time: f64,
        overlap: f64,
    },

    #[error("values must be positive on the fitted tail")]
    NonPositiveValues,

    #[error("bad range: {0}")]
    BadRange(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
