use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("numerical: {0}")]
    Numerical(#[from] kinsusp_core::Error),
    #[error("stored results: {0}")]
    Stored(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
