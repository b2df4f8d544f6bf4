#![allow(dead_code)]

use std::sync::Arc;

use edgecollab_core::env::{EdgeEnv, Request, Server, User};
use edgecollab_core::profiles::{LayerKind, LayerProfile, ModelProfile, OutDims};
use edgecollab_core::SystemConfig;

pub fn dense(flops: u64, param_bytes: u64, v: u64) -> LayerProfile {
    LayerProfile {
        kind: LayerKind::Dense,
        flops,
        param_bytes,
        out_dims: OutDims::Dense { v },
    }
}

/// Profile with linearly decaying leakage.
pub fn profile(model_id: usize, layers: Vec<LayerProfile>, raw_input_bytes: u64, total_bytes: u64) -> ModelProfile {
    let n = layers.len();
    let leakage_table = (0..=n).map(|l| 1.0 - l as f64 / n as f64).collect();
    ModelProfile {
        model_id,
        name: String::new(),
        layers,
        raw_input_bytes,
        total_bytes,
        leakage_table,
    }
}

pub fn server(compute_flops: f64, bandwidth_hz: f64, storage_bytes: u64, tx_power_w: f64) -> Server {
    Server {
        position: (0.0, 0.0),
        compute_flops,
        bandwidth_hz,
        storage_bytes,
        tx_power_w,
        cloud_rate_bps: 4e8,
    }
}

pub fn user(compute_flops: f64, tx_power_w: f64, privacy_pref: f64, energy_coeff: f64) -> User {
    User {
        position: (0.0, 0.0),
        compute_flops,
        tx_power_w,
        privacy_pref,
        energy_coeff,
    }
}

/// Hand-built environment; `gains` is indexed `user * J + server`.
pub fn hand_env(
    catalog: Vec<ModelProfile>,
    servers: Vec<Server>,
    users: Vec<User>,
    gains: Vec<f64>,
    requests: Vec<Request>,
    tweak: impl FnOnce(&mut SystemConfig),
) -> EdgeEnv {
    let mut cfg = SystemConfig {
        num_models: catalog.len(),
        num_servers: servers.len(),
        num_users: users.len(),
        episode_slots: 10,
        deploy_interval: 2,
        ..SystemConfig::default()
    };
    tweak(&mut cfg);
    let mut env = EdgeEnv::new(Arc::new(cfg), Arc::new(catalog), 0).unwrap();
    env.override_topology(servers, users, gains);
    env.override_requests(requests);
    env
}

pub fn desk_env(seed: u64) -> EdgeEnv {
    let cfg = SystemConfig::desk();
    let catalog = cfg.build_catalog().unwrap();
    EdgeEnv::new(Arc::new(cfg), Arc::new(catalog), seed).unwrap()
}
