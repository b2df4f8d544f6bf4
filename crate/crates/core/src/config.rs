//! Simulation parameters. Every field has a default, so a config file only
//! needs to list what it overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostWeights;
use crate::error::ConfigError;
use crate::profiles::{load_catalog, synth_catalog, BaseFamily, ModelProfile};
use crate::radio::ChannelParams;

/// Inclusive `[low, high]` range sampled uniformly.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CatalogSpec {
    Synthetic {
        families: Vec<BaseFamily>,
        services_per_model: usize,
        seed: u64,
    },
    File {
        path: String,
    },
}

impl Default for CatalogSpec {
    fn default() -> Self {
        CatalogSpec::Synthetic {
            families: BaseFamily::ALL.to_vec(),
            services_per_model: 5,
            seed: 7,
        }
    }
}

impl CatalogSpec {
    pub fn build(&self) -> Result<Vec<ModelProfile>, ConfigError> {
        match self {
            CatalogSpec::Synthetic {
                families,
                services_per_model,
                seed,
            } => Ok(synth_catalog(families, *services_per_model, *seed)),
            CatalogSpec::File { path } => Ok(load_catalog(path)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_models: usize,
    pub num_servers: usize,
    pub num_users: usize,
    /// Slots per episode.
    pub episode_slots: usize,
    /// Deployment update interval in slots.
    pub deploy_interval: usize,
    pub area_m: f64,
    pub user_compute_gflops: Range,
    pub server_compute_gflops: Range,
    pub server_bandwidth_mhz: Range,
    pub server_storage_gb: Range,
    pub cloud_rate_mbps: Range,
    pub privacy_pref: Range,
    /// Device energy per FLOP, joules.
    pub energy_coeff: Range,
    /// Inclusive batch-size range (samples per request).
    pub batch_range: [u32; 2],
    pub zipf_s: f64,
    pub mu_hit: f64,
    pub mu_mig: f64,
    pub channel: ChannelParams,
    pub weights: CostWeights,
    pub catalog: CatalogSpec,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_models: 45,
            num_servers: 10,
            num_users: 50,
            episode_slots: 200,
            deploy_interval: 10,
            area_m: 1000.0,
            user_compute_gflops: [10.0, 100.0],
            server_compute_gflops: [500.0, 2000.0],
            server_bandwidth_mhz: [50.0, 100.0],
            server_storage_gb: [3.0, 5.0],
            cloud_rate_mbps: [200.0, 500.0],
            privacy_pref: [0.2, 0.8],
            energy_coeff: [1e-11, 1e-9],
            batch_range: [1, 4],
            zipf_s: 0.8,
            mu_hit: 1.0,
            mu_mig: 0.5,
            channel: ChannelParams::default(),
            weights: CostWeights::default(),
            catalog: CatalogSpec::default(),
            seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SystemConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.num_models == 0 || self.num_servers == 0 || self.num_users == 0 {
            return bad("model, server and user counts must be positive".into());
        }
        if self.deploy_interval == 0 || self.episode_slots == 0 {
            return bad("deploy_interval and episode_slots must be positive".into());
        }
        if self.episode_slots % self.deploy_interval != 0 {
            return bad(format!(
                "deploy_interval {} must divide episode_slots {}",
                self.deploy_interval, self.episode_slots
            ));
        }
        for (name, r) in [
            ("user_compute_gflops", self.user_compute_gflops),
            ("server_compute_gflops", self.server_compute_gflops),
            ("server_bandwidth_mhz", self.server_bandwidth_mhz),
            ("server_storage_gb", self.server_storage_gb),
            ("cloud_rate_mbps", self.cloud_rate_mbps),
            ("privacy_pref", self.privacy_pref),
            ("energy_coeff", self.energy_coeff),
        ] {
            if !(r[0] <= r[1]) || r[0] < 0.0 {
                return bad(format!("{name} range [{}, {}] is empty or negative", r[0], r[1]));
            }
        }
        if self.user_compute_gflops[0] <= 0.0 || self.server_compute_gflops[0] <= 0.0 {
            return bad("compute capacities must be positive".into());
        }
        if self.server_bandwidth_mhz[0] <= 0.0 || self.cloud_rate_mbps[0] <= 0.0 {
            return bad("bandwidth and cloud rate must be positive".into());
        }
        if self.privacy_pref[1] > 1.0 {
            return bad("privacy preferences must lie in [0, 1]".into());
        }
        if self.batch_range[0] == 0 || self.batch_range[0] > self.batch_range[1] {
            return bad("batch_range must be a non-empty range starting at 1 or more".into());
        }
        if !(self.zipf_s >= 0.0) || !(self.area_m > 0.0) {
            return bad("zipf_s must be non-negative and area_m positive".into());
        }
        if !(self.mu_hit >= 0.0 && self.mu_mig >= 0.0) {
            return bad("mu_hit and mu_mig must be non-negative".into());
        }
        self.channel.validate().map_err(ConfigError::Invalid)?;
        self.weights.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Builds the catalog and checks that its size matches `num_models`.
    pub fn build_catalog(&self) -> Result<Vec<ModelProfile>, ConfigError> {
        let catalog = self.catalog.build()?;
        if catalog.len() != self.num_models {
            return Err(ConfigError::Invalid(format!(
                "catalog has {} models but num_models is {}",
                catalog.len(),
                self.num_models
            )));
        }
        Ok(catalog)
    }

    /// Desk-scale preset: J=3, K=8, three families with two services each.
    /// The energy coefficient is scaled down so that privacy-driven deep
    /// partitions break the delay constraint when it is ignored.
    pub fn desk() -> Self {
        Self {
            energy_coeff: [3e-12, 3e-11],
            num_models: 6,
            num_servers: 3,
            num_users: 8,
            episode_slots: 100,
            deploy_interval: 5,
            catalog: CatalogSpec::Synthetic {
                families: vec![BaseFamily::LeNet9, BaseFamily::ResNet18, BaseFamily::Vgg16],
                services_per_model: 2,
                seed: 7,
            },
            ..Self::default()
        }
    }

    pub fn max_layers(catalog: &[ModelProfile]) -> usize {
        catalog.iter().map(|m| m.layer_count()).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_catalog() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.build_catalog().unwrap().len(), 45);
        let desk = SystemConfig::desk();
        desk.validate().unwrap();
        assert_eq!(desk.build_catalog().unwrap().len(), 6);
    }

    #[test]
    fn toml_round_trip_and_partial_override() {
        let cfg = SystemConfig::desk();
        let back = SystemConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let partial = SystemConfig::from_toml("num_users = 12\n[weights]\ntau_bar = 2.5\n").unwrap();
        assert_eq!(partial.num_users, 12);
        assert_eq!(partial.weights.tau_bar, 2.5);
        assert_eq!(partial.weights.mu1, 5.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SystemConfig::from_toml("deploy_interval = 7").is_err());
        assert!(SystemConfig::from_toml("server_storage_gb = [5.0, 3.0]").is_err());
        assert!(SystemConfig::from_toml("[weights]\ntau_fail = 1.0").is_err());
        assert!(SystemConfig::from_toml("unknown_key = 1").is_err());
        let cfg = SystemConfig {
            num_models: 7,
            ..SystemConfig::desk()
        };
        assert!(cfg.build_catalog().is_err());
    }
}
