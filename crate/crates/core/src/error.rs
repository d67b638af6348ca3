use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("component {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("model has not been fitted")]
    Unfitted,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: {detail}")]
    TrainingDiverged { step: usize, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("evaluator fatal error: {0}")]
    EvaluatorFatal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
