use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("measures live on different metric spaces")]
    MetricMismatch,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown model builder `{0}`")]
    UnknownBuilder(String),

    #[error("episode {episode}: policy chose infeasible action {action} in state {state} at t={t}")]
    InfeasibleAction {
        episode: usize,
        t: usize,
        state: usize,
        action: usize,
    },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("malformed input at {pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
