//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("circuit depth cap reached ({max_depth} layers)")]
    DepthExceeded { max_depth: usize },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("feature cache unavailable: {0}")]
    CacheUnavailable(String),

    #[error("ill-conditioned system: {0}; try a larger regularization")]
    IllConditioned(String),

    #[error("degenerate labels: training set contains a single class")]
    DegenerateLabels,

    #[error("undefined variance: y_true is constant, R^2 is not defined")]
    UndefinedVariance,

    #[error("undefined alignment: {0}")]
    UndefinedAlignment(String),

    #[error("scoring failed: {0}")]
    ScoringFailed(String),

    #[error("agent corrupt: {0}")]
    AgentCorrupt(String),

    #[error("training diverged: {0}")]
    TrainingDivergence(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("hyperparameter search failed: every trial errored")]
    HyperoptFailed,

    #[error("evaluation budget exhausted")]
    BudgetExhausted,

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
