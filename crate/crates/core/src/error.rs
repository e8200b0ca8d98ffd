use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical consistency check failed: {what} (residual {residual:e}, tolerance {tolerance:e})")]
    NumericalConsistency {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    /// The mean spin is too short to define a transverse plane.
    #[error("mean spin vanishes (|<J>| = {norm:e}){}", sample.map(|i| format!(" at sample {i}")).unwrap_or_default())]
    MeanSpinVanishing { norm: f64, sample: Option<usize> },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("need at least {needed} points for a fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a trace index to a [`Error::MeanSpinVanishing`].
    pub fn at_sample(self, index: usize) -> Self {
        match self {
            Error::MeanSpinVanishing { norm, .. } => Error::MeanSpinVanishing {
                norm,
                sample: Some(index),
            },
            other => other,
        }
    }
}
