//! Experiment runner for `cohthermo`: configuration, parallel grid sweeps,
//! CSV and manifest output, and the built-in invariant suite.

pub mod check;
pub mod config;
pub mod ensemble;
pub mod runner;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invariant breach: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] cohthermo::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) | CliError::Core(_) => 3,
            _ => 1,
        }
    }
}
