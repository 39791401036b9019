use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("radius {r} outside the admissible range ({lo}, {hi})")]
    RadiusOutOfRange { r: f64, lo: f64, hi: f64 },

    #[error("non-finite sample at {0}")]
    NonFinite(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("divisor hit on the contour at radius {0}")]
    ZeroOnContour(f64),

    #[error("count confidence {distance:.3} worse than {limit}")]
    LowConfidence { distance: f64, limit: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schedule has {got} radii, need at least {need}")]
    InsufficientSchedule { got: usize, need: usize },

    #[error("series is not monotone; fit refused")]
    NonMonotone,

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
