use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree overflow: {what} needs max_degree >= {required}, dictionary has {available}")]
    DegreeOverflow {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("weight b(x) is not strictly positive at quadrature node {point:?}")]
    SingularWeight { point: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no stabilizing Riccati solution ({0}); the linearization must be stabilizable")]
    NotStabilizable(String),

    #[error("constraint `{block}` cannot be a sum of squares: {reason}")]
    NotSos { block: String, reason: String },

    #[error("solver returned {status}: {detail}")]
    Solver { status: String, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing prerequisite for stage `{stage}`: {path}")]
    MissingPrerequisite { stage: String, path: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
