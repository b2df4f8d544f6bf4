//! Minimal differentiable function approximators for the agents: dense
//! tensors, a reverse-mode graph over a fixed operator set, MLP / GRU /
//! embedding layers, masked categorical sampling, orthogonal
//! initialization, Adam, JSON checkpoints and a finite-difference checker.
//! Everything is `f64`.

pub mod adam;
pub mod checkpoint;
pub mod dist;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod layers;
pub mod params;
pub mod tensor;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointError};
pub use dist::{attention_weights, masked_softmax, MaskedCategorical};
pub use error::NeuralError;
pub use graph::{Graph, Var};
pub use init::orthogonal_init;
pub use layers::{Embedding, GruCell, Linear, Mlp, ScalarEncoder};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor2;
