use edgecollab_core::EnvError;
use edgecollab_neural::{CheckpointError, NeuralError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint does not match this trainer: {0}")]
    Incompatible(String),
    #[error("invalid hyperparameters: {0}")]
    Config(String),
}
