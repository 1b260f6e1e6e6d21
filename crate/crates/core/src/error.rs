use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("knots must be strictly increasing and finite (got {0:?})")]
    InvalidKnots(Vec<f64>),

    #[error("basis index {index} out of range for {len} functions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("normal system is singular and could not be solved")]
    SingularSystem,

    #[error("value {value} outside representable range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),

    #[error("problem dimension {n} exceeds exhaustive-search limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error("external sampler failed: {0}")]
    ExternalFailure(String),

    #[error("reported energy {reported} deviates from recomputed {recomputed}")]
    EnergyMismatch { reported: f64, recomputed: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ExternalFailure(_) | Error::EnergyMismatch { .. } => 3,
            _ => 2,
        }
    }
}
