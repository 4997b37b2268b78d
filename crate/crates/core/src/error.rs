//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RecourseError>;

#[derive(Debug, Error)]
pub enum RecourseError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("norm order {p} is not supported by {by}")]
    UnsupportedNorm { p: String, by: &'static str },

    /// An iterative routine ran out of iterations. `best` is the best iterate
    /// found and `residual` its constraint violation or change measure.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("feasible region is empty")]
    Infeasible,

    #[error("every candidate subproblem was infeasible")]
    NoFeasibleCandidate,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("row {row}, column `{column}`: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RecourseError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RecourseError::InvalidParameter(msg.into())
    }

    /// True for failures caused by numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            RecourseError::NotConverged { .. }
                | RecourseError::Singular(_)
                | RecourseError::NoFeasibleCandidate
                | RecourseError::NonFinite(_)
        )
    }
}
