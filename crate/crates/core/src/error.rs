use thiserror::Error;

/// Errors produced by the model, solvers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("activation pattern has no active antenna")]
    ZeroActivation,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("activation set does not match configuration: {0}")]
    ConfigMismatch(String),

    #[error("uplink window is empty; no NOMA view exists")]
    DegenerateUplink,

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
