//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by geometry, transport, quadrature and harness code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("invalid count {0}: need at least {1}")]
    InvalidCount(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector of norm {0} cannot be normalized")]
    ZeroNorm(f64),

    #[error("point is not on the unit sphere: |norm - 1| = {0:e}")]
    NotUnitNorm(f64),

    #[error("coordinate {index} = {value} outside [{lo}, {hi}]")]
    OutsideBox {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("order p = {0} is not supported: need p >= 1")]
    InvalidOrder(f64),

    #[error("empty measure or node set")]
    Empty,

    #[error("weights must be nonnegative and sum to 1 (sum = {0})")]
    BadWeights(f64),

    #[error("argument {0} outside domain: {1}")]
    OutOfDomain(&'static str, f64),

    #[error("degree {0} exceeds basis maximum {1}")]
    DegreeOutOfRange(usize, usize),

    #[error("fundamental set construction failed at degree {degree}: {reason}")]
    BasisConstruction { degree: usize, reason: String },

    #[error("projection DPP sampling failed: {0}")]
    DppSampling(String),

    #[error("importance-sampling metadata missing or invalid: {0}")]
    Importance(String),

    #[error("estimator setup invalid: {0}")]
    Estimator(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
