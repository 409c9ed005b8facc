use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("missing artifact `{0}`")]
    Missing(String),
    #[error("method `{method}` cannot run {what}")]
    Incompatible { method: &'static str, what: String },
    #[error(transparent)]
    Core(#[from] cfforest::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
