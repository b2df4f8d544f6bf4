//! JSON checkpoints: named parameter tensors, RNG states and free-form
//! metadata.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "params": [{"name": "user.trunk.0.w", "shape": [42, 64], "values": [...]}],
//!   "rng_states": {"rollout": {...}},
//!   "extra": {"lagrange": {...}}
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NeuralError;
use crate::params::ParamStore;
use crate::tensor::Tensor2;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: (usize, usize),
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: Vec<NamedTensor>,
    pub rng_states: BTreeMap<String, ChaCha8Rng>,
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            params: Vec::new(),
            rng_states: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }
}

impl Checkpoint {
    /// Appends every tensor of `store`, prefixing names with `prefix`.
    pub fn add_store(&mut self, prefix: &str, store: &ParamStore) {
        for (name, t) in store.named_values() {
            self.params.push(NamedTensor {
                name: format!("{prefix}{name}"),
                shape: t.shape(),
                values: t.data().to_vec(),
            });
        }
    }

    /// Overwrites every tensor of `store` from the entries named
    /// `prefix + name`; shapes must match.
    pub fn load_store(&self, prefix: &str, store: &mut ParamStore) -> Result<(), NeuralError> {
        let index: BTreeMap<&str, &NamedTensor> = self.params.iter().map(|p| (p.name.as_str(), p)).collect();
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let full = format!("{prefix}{}", store.name(id));
            let t = index.get(full.as_str()).ok_or_else(|| NeuralError::MissingParam(full.clone()))?;
            let expected = store.value(id).shape();
            if t.shape != expected || t.values.len() != expected.0 * expected.1 {
                return Err(NeuralError::ParamShape {
                    name: full,
                    found: t.shape,
                    expected,
                });
            }
            *store.value_mut(id) = Tensor2::from_vec(t.shape.0, t.shape.1, t.values.clone());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format_version != FORMAT_VERSION {
            return Err(NeuralError::Version(c.format_version).into());
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Content(#[from] NeuralError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_restores_params_and_rng() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        store.add_weight("a", 3, 2, 1.0, &mut rng);
        store.add_zeros("b", 1, 2);
        let mut ck = Checkpoint::default();
        ck.add_store("net.", &store);
        let _: f64 = rng.random();
        ck.rng_states.insert("r".into(), rng.clone());
        ck.extra.insert("lambda".into(), serde_json::json!(0.25));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let mut fresh = ParamStore::new();
        fresh.add_zeros("a", 3, 2);
        fresh.add_zeros("b", 1, 2);
        back.load_store("net.", &mut fresh).unwrap();
        assert_eq!(fresh.named_values().collect::<Vec<_>>(), store.named_values().collect::<Vec<_>>());
        let mut r2 = back.rng_states["r"].clone();
        assert_eq!(r2.random::<u64>(), rng.random::<u64>());
    }

    #[test]
    fn shape_mismatch_and_missing_params_are_errors() {
        let mut store = ParamStore::new();
        store.add_zeros("a", 2, 2);
        let mut ck = Checkpoint::default();
        ck.add_store("", &store);
        let mut other = ParamStore::new();
        other.add_zeros("a", 2, 3);
        assert!(matches!(ck.load_store("", &mut other), Err(NeuralError::ParamShape { .. })));
        let mut other = ParamStore::new();
        other.add_zeros("z", 2, 2);
        assert!(matches!(ck.load_store("", &mut other), Err(NeuralError::MissingParam(_))));
        let mut bad = ck.clone();
        bad.format_version = 9;
        assert!(Checkpoint::from_json(&bad.to_json()).is_err());
    }
}
