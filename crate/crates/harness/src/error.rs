use std::io;

use edgecollab_core::ConfigError;
use edgecollab_marl::MarlError;
use edgecollab_neural::CheckpointError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot parse {path}: {source}")]
    Toml {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error(transparent)]
    Marl(#[from] MarlError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Run(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 4 for failed
    /// checks, 3 for everything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Plan(_) | HarnessError::Config(_) | HarnessError::Toml { .. } => 2,
            HarnessError::Marl(MarlError::Config(_)) => 2,
            HarnessError::Check(_) => 4,
            _ => 3,
        }
    }
}
