use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("hyperparameter fit failed: {0}")]
    FitFailure(String),

    #[error("acquisition maximization failed: {0}")]
    MaximizationFailure(String),

    #[error("remaining budget admits no feasible candidate")]
    BudgetExhausted,

    #[error("history is empty")]
    EmptyHistory,

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}
