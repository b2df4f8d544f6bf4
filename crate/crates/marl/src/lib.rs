//! Hierarchical constrained multi-agent PPO for collaborative edge
//! inference. Three agent layers share parameters within each layer:
//! per-server deployment decoders, per-user association and partition
//! policies, and per-server attention allocators. A shared Lagrange
//! multiplier on the mean delay turns the delay constraint into an
//! adaptive penalty on the user layer.

pub mod alloc;
pub mod critic;
pub mod deploy;
pub mod dims;
pub mod error;
pub mod features;
pub mod gae;
pub mod lagrange;
pub mod ppo;
pub mod rollout;
pub mod trainer;
pub mod user;
pub mod valuenorm;

pub use alloc::{AllocInput, AllocPolicy, AllocSample};
pub use critic::Critic;
pub use deploy::{macro_value, DeployMacro, DeployPolicy};
pub use dims::Dims;
pub use error::MarlError;
pub use gae::{gae, normalize, Advantages};
pub use lagrange::LagrangeState;
pub use ppo::{ppo_clip_graph, ppo_clip_objective};
pub use rollout::{derive_seed, Episode, EpisodeStats, Execution, Mode};
pub use trainer::{effective_config, EvalReport, IterationMetrics, Nets, TrainConfig, Trainer};
pub use user::{UserInput, UserPolicy, UserSample};
pub use valuenorm::ValueNorm;
