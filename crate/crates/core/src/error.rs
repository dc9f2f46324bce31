use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Collaboration weight at or above `1/sqrt(m)`: the WGA descent
    /// guarantee has a non-positive leading coefficient.
    #[error("WGA bound vacuous: alpha = {alpha} >= 1/sqrt(m) with m = {m}")]
    VacuousWga { alpha: f64, m: f64 },

    #[error("step size {eta} violates the bound precondition eta <= {limit}")]
    StepTooLarge { eta: f64, limit: f64 },

    #[error("no collaborators given")]
    NoCollaborators,

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("csv output failed: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
