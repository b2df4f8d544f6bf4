//! Network sizes derived from the system dimensions.

use edgecollab_core::EdgeEnv;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub models: usize,
    pub servers: usize,
    pub users: usize,
    pub max_layers: usize,
    pub hidden: usize,
    /// Width of the model-id and scalar embeddings.
    pub embed: usize,
    /// Width of attention queries and keys.
    pub attn: usize,
}

impl Dims {
    pub fn new(models: usize, servers: usize, users: usize, max_layers: usize) -> Self {
        Self {
            models,
            servers,
            users,
            max_layers,
            hidden: 64,
            embed: 8,
            attn: 16,
        }
    }

    pub fn of(env: &EdgeEnv) -> Self {
        let c = env.config();
        Self::new(c.num_models, c.num_servers, c.num_users, env.max_layers())
    }

    pub fn with_hidden(self, hidden: usize) -> Self {
        Self { hidden, ..self }
    }

    pub fn with_embed(self, embed: usize, attn: usize) -> Self {
        Self { embed, attn, ..self }
    }
}
