use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("every category is masked")]
    AllMasked,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint is missing parameter {0}")]
    MissingParam(String),
    #[error("checkpoint parameter {name} has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
}
