//! Simulation core for collaborative edge inference: model profiles, the
//! radio channel, cost models, the multi-slot environment and heuristic
//! baselines.

pub mod baselines;
pub mod config;
pub mod cost;
pub mod env;
pub mod error;
pub mod profiles;
pub mod radio;

pub use baselines::{
    Algorithm, AllocationRule, AssociationRule, BaselineSpec, ConstraintHandling, CriticScope, DeploymentRule, PartitionRule,
};
pub use config::{CatalogSpec, SystemConfig};
pub use env::{AllocAction, EdgeEnv, SlotOutcome, UserAction};
pub use error::{ConfigError, CostError, EnvError, ProfileError};
pub use profiles::{ModelProfile, PartitionSummary};
