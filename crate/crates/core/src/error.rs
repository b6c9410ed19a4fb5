use thiserror::Error;

/// Errors raised by the orchestration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("strategy not ready: {0}")]
    NotReady(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("grid search space has {count} combinations, above the cap of {cap}")]
    GridTooLarge { count: usize, cap: usize },

    #[error("training diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
