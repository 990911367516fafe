use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("cannot read {}: {source}", path.display())]
    Input { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run aborted: {0}")]
    Aborted(String),
    #[error("safe fraction {actual:.4} is below the required {required:.4}")]
    BelowThreshold { actual: f64, required: f64 },
}

impl CliError {
    pub fn from_core(e: swarmfield::Error) -> Self {
        match e {
            swarmfield::Error::Invalid(v) => CliError::Validation(v),
            other => CliError::Validation(vec![other.to_string()]),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Input { .. } => 1,
            CliError::Io { .. } | CliError::Aborted(_) => 2,
            CliError::BelowThreshold { .. } => 3,
        }
    }
}
