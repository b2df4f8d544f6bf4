//! Discrete-time environment for collaborative inference.
//!
//! Each slot runs in three phases:
//! 1. on interval boundaries (`slot % deploy_interval == 0`) every server gets a
//!    new model set via [`EdgeEnv::apply_deployment`];
//! 2. users pick a server and a partition point;
//! 3. servers split compute and bandwidth across their users and the slot is
//!    evaluated by [`EdgeEnv::step`].
//!
//! An instance is single-threaded; independent instances share only the
//! read-only catalog.

use std::io::Write;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::config::{Range, SystemConfig};
use crate::cost::{delay_components, energy, privacy_cost, CostWeights, DelayBreakdown};
use crate::error::EnvError;
use crate::profiles::ModelProfile;
use crate::radio::{dbm_to_watts, noise_power, path_gain, shannon_rate};

const TOPOLOGY_STREAM: u64 = 1;
const REQUEST_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Server {
    pub position: (f64, f64),
    pub compute_flops: f64,
    pub bandwidth_hz: f64,
    pub storage_bytes: u64,
    pub tx_power_w: f64,
    pub cloud_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub position: (f64, f64),
    pub compute_flops: f64,
    pub tx_power_w: f64,
    pub privacy_pref: f64,
    pub energy_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub user: usize,
    pub model: usize,
    pub batch: u32,
}

/// Server choice and partition point of one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserAction {
    pub server: usize,
    pub split: usize,
}

/// Per-user resource weights of one server, indexed by user. Entries of users
/// not associated with the server are ignored; the rest are renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocAction {
    pub comp: Vec<f64>,
    pub band: Vec<f64>,
}

impl AllocAction {
    pub fn uniform(num_users: usize) -> Self {
        Self {
            comp: vec![1.0; num_users],
            band: vec![1.0; num_users],
        }
    }
}

/// Binary model-by-server deployment matrix, stored row-major (`i * J + j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deployment {
    models: usize,
    servers: usize,
    bits: Vec<bool>,
}

impl Deployment {
    pub fn empty(models: usize, servers: usize) -> Self {
        Self {
            models,
            servers,
            bits: vec![false; models * servers],
        }
    }

    pub fn full(models: usize, servers: usize) -> Self {
        Self {
            models,
            servers,
            bits: vec![true; models * servers],
        }
    }

    pub fn get(&self, model: usize, server: usize) -> bool {
        self.bits[model * self.servers + server]
    }

    pub fn set(&mut self, model: usize, server: usize, on: bool) {
        self.bits[model * self.servers + server] = on;
    }

    pub fn server_models(&self, server: usize) -> Vec<usize> {
        (0..self.models).filter(|&i| self.get(i, server)).collect()
    }

    pub fn set_server(&mut self, server: usize, models: &[usize]) {
        for i in 0..self.models {
            self.set(i, server, false);
        }
        for &i in models {
            self.set(i, server, true);
        }
    }

    pub fn storage_used(&self, server: usize, catalog: &[ModelProfile]) -> u64 {
        (0..self.models)
            .filter(|&i| self.get(i, server))
            .map(|i| catalog[i].total_bytes)
            .sum()
    }

    /// `vec(X)` as 0/1 reals.
    pub fn as_features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn num_models(&self) -> usize {
        self.models
    }

    pub fn num_servers(&self) -> usize {
        self.servers
    }
}

/// Zipf popularity over model ranks: model `i` has rank `i + 1`.
#[derive(Debug, Clone)]
pub struct ZipfLaw {
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl ZipfLaw {
    pub fn new(num_models: usize, s: f64) -> Self {
        assert!(num_models >= 1, "zipf law needs at least one model");
        let weights: Vec<f64> = (1..=num_models).map(|r| (r as f64).powf(-s)).collect();
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / total).collect();
        let index = WeightedIndex::new(&weights).expect("zipf weights are positive");
        Self { probs, index }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// One request per user: Zipf-distributed model, uniform batch size.
pub fn sample_requests<R: Rng + ?Sized>(
    rng: &mut R,
    zipf: &ZipfLaw,
    num_users: usize,
    batch_range: [u32; 2],
) -> Vec<Request> {
    (0..num_users)
        .map(|user| Request {
            user,
            model: zipf.sample(rng),
            batch: rng.random_range(batch_range[0]..=batch_range[1]),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserOutcome {
    pub request: Request,
    pub action: UserAction,
    pub hit: bool,
    pub delay: DelayBreakdown,
    pub energy_j: f64,
    pub privacy: f64,
    pub reward: f64,
    pub compute_flops: f64,
    pub bandwidth_hz: f64,
}

impl UserOutcome {
    /// Constraint cost: the end-to-end delay.
    pub fn constraint_cost(&self) -> f64 {
        self.delay.total_s
    }

    pub fn meets_deadline(&self, tau_bar: f64) -> bool {
        self.hit && self.delay.total_s <= tau_bar
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: usize,
    pub users: Vec<UserOutcome>,
    /// Per-server reward of the allocation agents.
    pub alloc_rewards: Vec<f64>,
    /// Per-server reward of the deployment agents, present when this slot
    /// closed a deployment interval.
    pub deploy_rewards: Option<Vec<f64>>,
    pub done: bool,
}

impl SlotOutcome {
    pub fn mean_delay(&self) -> f64 {
        mean(self.users.iter().map(|u| u.delay.total_s))
    }

    pub fn mean_energy(&self) -> f64 {
        mean(self.users.iter().map(|u| u.energy_j))
    }

    pub fn mean_privacy(&self) -> f64 {
        mean(self.users.iter().map(|u| u.privacy))
    }

    pub fn hit_rate(&self) -> f64 {
        mean(self.users.iter().map(|u| if u.hit { 1.0 } else { 0.0 }))
    }

    pub fn constraint_costs(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.constraint_cost()).collect()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn user_reward(outcome: &UserOutcome, w: &CostWeights) -> f64 {
    if !outcome.hit {
        return w.r_fail;
    }
    let late = (outcome.delay.total_s - w.tau_bar).max(0.0);
    -(w.mu1 * outcome.privacy + w.mu2 * outcome.energy_j + w.mu3 * late)
}

/// `mu_hit * hits - mu_mig * migration_seconds`.
pub fn deploy_reward(hits: u64, migration_s: f64, mu_hit: f64, mu_mig: f64) -> f64 {
    mu_hit * hits as f64 - mu_mig * migration_s
}

/// Seconds needed to fetch the models present in `new` but not in `old`.
pub fn migration_cost(
    new: &Deployment,
    old: &Deployment,
    server: usize,
    catalog: &[ModelProfile],
    cloud_rate_bps: f64,
) -> f64 {
    (0..new.num_models())
        .filter(|&i| new.get(i, server) && !old.get(i, server))
        .map(|i| 8.0 * catalog[i].total_bytes as f64 / cloud_rate_bps)
        .sum()
}

/// Negative mean delay over the associated users, 0 if there are none.
pub fn alloc_reward(delays: &[f64]) -> f64 {
    if delays.is_empty() {
        0.0
    } else {
        -delays.iter().sum::<f64>() / delays.len() as f64
    }
}

/// Per-deployment-agent observation: the local part has `3I` entries
/// `[r, h_j, x_st]` (x_st zeroed), the global part appends `vec(X)` of the
/// previous interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployObs {
    pub local: Vec<f64>,
    pub global: Vec<f64>,
}

/// Raw per-user observation; the policy embeds `model` and `batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserObs {
    pub model: usize,
    pub batch: u32,
    pub deployment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBundle {
    pub deploy: Vec<DeployObs>,
    pub user_local: Vec<UserObs>,
    pub user_global: Vec<f64>,
    pub alloc: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct History {
    /// Requests per model during the running interval.
    requests: Vec<u64>,
    /// Requests per (server, model) during the running interval.
    server_requests: Vec<u64>,
    hits: Vec<u64>,
    last_requests: Vec<u64>,
    last_server_requests: Vec<u64>,
    cumulative_requests: Vec<u64>,
    /// Last slot at which (server, model) was requested.
    last_used: Vec<Option<u64>>,
}

impl History {
    fn new(models: usize, servers: usize) -> Self {
        Self {
            requests: vec![0; models],
            server_requests: vec![0; models * servers],
            hits: vec![0; servers],
            last_requests: vec![0; models],
            last_server_requests: vec![0; models * servers],
            cumulative_requests: vec![0; models],
            last_used: vec![None; models * servers],
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeEnv {
    config: Arc<SystemConfig>,
    catalog: Arc<Vec<ModelProfile>>,
    zipf: ZipfLaw,
    max_layers: usize,
    servers: Vec<Server>,
    users: Vec<User>,
    /// Link gains, `k * J + j`.
    gains: Vec<f64>,
    deployment: Deployment,
    prev_deployment: Deployment,
    migration_s: Vec<f64>,
    deployed_this_interval: bool,
    slot: usize,
    requests: Vec<Request>,
    history: History,
    request_rng: ChaCha8Rng,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Centers of a near-square grid over the area, row by row.
pub fn grid_positions(count: usize, area_m: f64) -> Vec<(f64, f64)> {
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    (0..count)
        .map(|n| {
            let (r, c) = (n / cols, n % cols);
            (
                (c as f64 + 0.5) * area_m / cols as f64,
                (r as f64 + 0.5) * area_m / rows as f64,
            )
        })
        .collect()
}

impl EdgeEnv {
    pub fn new(config: Arc<SystemConfig>, catalog: Arc<Vec<ModelProfile>>, seed: u64) -> Result<Self, EnvError> {
        if catalog.len() != config.num_models {
            return Err(EnvError::CatalogMismatch {
                catalog: catalog.len(),
                config: config.num_models,
            });
        }
        let (i, j) = (config.num_models, config.num_servers);
        let mut env = Self {
            zipf: ZipfLaw::new(i, config.zipf_s),
            max_layers: SystemConfig::max_layers(&catalog),
            servers: Vec::new(),
            users: Vec::new(),
            gains: Vec::new(),
            deployment: Deployment::empty(i, j),
            prev_deployment: Deployment::empty(i, j),
            migration_s: vec![0.0; j],
            deployed_this_interval: false,
            slot: 0,
            requests: Vec::new(),
            history: History::new(i, j),
            request_rng: ChaCha8Rng::seed_from_u64(seed),
            config,
            catalog,
        };
        env.reset(seed);
        Ok(env)
    }

    /// Redraws topology, capacities, preferences and shadowing from `seed`,
    /// clears the deployment and history, and samples slot-0 requests.
    pub fn reset(&mut self, seed: u64) {
        let cfg = Arc::clone(&self.config);
        let mut topo = ChaCha8Rng::seed_from_u64(seed);
        topo.set_stream(TOPOLOGY_STREAM);
        let ch = &cfg.channel;
        self.servers = grid_positions(cfg.num_servers, cfg.area_m)
            .into_iter()
            .map(|position| Server {
                position,
                compute_flops: uniform(&mut topo, cfg.server_compute_gflops) * 1e9,
                bandwidth_hz: uniform(&mut topo, cfg.server_bandwidth_mhz) * 1e6,
                storage_bytes: (uniform(&mut topo, cfg.server_storage_gb) * 1e9) as u64,
                tx_power_w: dbm_to_watts(uniform(&mut topo, ch.server_tx_power_dbm)),
                cloud_rate_bps: uniform(&mut topo, cfg.cloud_rate_mbps) * 1e6,
            })
            .collect();
        self.users = (0..cfg.num_users)
            .map(|_| User {
                position: (
                    topo.random_range(0.0..=cfg.area_m),
                    topo.random_range(0.0..=cfg.area_m),
                ),
                compute_flops: uniform(&mut topo, cfg.user_compute_gflops) * 1e9,
                tx_power_w: dbm_to_watts(uniform(&mut topo, ch.user_tx_power_dbm)),
                privacy_pref: uniform(&mut topo, cfg.privacy_pref),
                energy_coeff: uniform(&mut topo, cfg.energy_coeff),
            })
            .collect();
        let shadow = Normal::new(0.0, ch.shadow_sigma_db).expect("sigma validated non-negative");
        self.gains = Vec::with_capacity(cfg.num_users * cfg.num_servers);
        for u in &self.users {
            for s in &self.servers {
                let d = ((u.position.0 - s.position.0).powi(2) + (u.position.1 - s.position.1).powi(2)).sqrt();
                self.gains.push(path_gain(d, shadow.sample(&mut topo), ch));
            }
        }
        self.new_episode(seed);
    }

    /// Starts a new episode on the current topology: clears the deployment
    /// and history and reseeds the request stream.
    pub fn new_episode(&mut self, seed: u64) {
        let cfg = Arc::clone(&self.config);
        let (i, j) = (cfg.num_models, cfg.num_servers);
        self.deployment = Deployment::empty(i, j);
        self.prev_deployment = Deployment::empty(i, j);
        self.migration_s = vec![0.0; j];
        self.deployed_this_interval = false;
        self.slot = 0;
        self.history = History::new(i, j);
        self.request_rng = ChaCha8Rng::seed_from_u64(seed);
        self.request_rng.set_stream(REQUEST_STREAM);
        self.requests = sample_requests(&mut self.request_rng, &self.zipf, cfg.num_users, cfg.batch_range);
    }

    /// Replaces the drawn topology. For hand-built scenarios; `gains` is
    /// indexed `user * J + server`.
    pub fn override_topology(&mut self, servers: Vec<Server>, users: Vec<User>, gains: Vec<f64>) {
        assert_eq!(servers.len(), self.config.num_servers, "server count");
        assert_eq!(users.len(), self.config.num_users, "user count");
        assert_eq!(gains.len(), servers.len() * users.len(), "gain count");
        self.servers = servers;
        self.users = users;
        self.gains = gains;
    }

    /// Replaces the pending requests of the current slot.
    pub fn override_requests(&mut self, requests: Vec<Request>) {
        assert_eq!(requests.len(), self.config.num_users, "one request per user");
        assert!(requests.iter().all(|r| r.model < self.config.num_models && r.batch >= 1));
        self.requests = requests;
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn catalog(&self) -> &[ModelProfile] {
        &self.catalog
    }

    pub fn servers(&self) -> &[Server] {
        &self.servers
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn gain(&self, user: usize, server: usize) -> f64 {
        self.gains[user * self.config.num_servers + server]
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn previous_deployment(&self) -> &Deployment {
        &self.prev_deployment
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn max_layers(&self) -> usize {
        self.max_layers
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.episode_slots
    }

    pub fn deployment_due(&self) -> bool {
        !self.is_done() && self.slot % self.config.deploy_interval == 0 && !self.deployed_this_interval
    }

    /// Requests per model seen so far in the episode.
    pub fn cumulative_requests(&self) -> &[u64] {
        &self.history.cumulative_requests
    }

    /// Last slot at which `model` was requested through `server`.
    pub fn last_used(&self, server: usize, model: usize) -> Option<u64> {
        self.history.last_used[model * self.config.num_servers + server]
    }

    pub fn storage_left(&self, server: usize) -> u64 {
        self.servers[server]
            .storage_bytes
            .saturating_sub(self.deployment.storage_used(server, &self.catalog))
    }

    pub fn model_sizes(&self) -> Vec<u64> {
        self.catalog.iter().map(|m| m.total_bytes).collect()
    }

    /// Sets every server's model set for the coming interval.
    pub fn apply_deployment(&mut self, macros: &[Vec<usize>]) -> Result<(), EnvError> {
        let cfg = Arc::clone(&self.config);
        if self.is_done() {
            return Err(EnvError::EpisodeOver(self.slot));
        }
        if self.slot % cfg.deploy_interval != 0 || self.deployed_this_interval {
            return Err(EnvError::NotDeploymentSlot(self.slot));
        }
        if macros.len() != cfg.num_servers {
            return Err(EnvError::MalformedAction(format!(
                "expected {} deployment macro-actions, got {}",
                cfg.num_servers,
                macros.len()
            )));
        }
        let mut next = Deployment::empty(cfg.num_models, cfg.num_servers);
        for (j, m) in macros.iter().enumerate() {
            let mut needed = 0u64;
            for &i in m {
                if i >= cfg.num_models {
                    return Err(EnvError::MalformedAction(format!("server {j}: model {i} does not exist")));
                }
                if next.get(i, j) {
                    return Err(EnvError::MalformedAction(format!("server {j}: model {i} repeated")));
                }
                next.set(i, j, true);
                needed += self.catalog[i].total_bytes;
            }
            if needed > self.servers[j].storage_bytes {
                return Err(EnvError::StorageOverflow {
                    server: j,
                    needed,
                    capacity: self.servers[j].storage_bytes,
                });
            }
        }
        self.prev_deployment = std::mem::replace(&mut self.deployment, next);
        for j in 0..cfg.num_servers {
            self.migration_s[j] = migration_cost(
                &self.deployment,
                &self.prev_deployment,
                j,
                &self.catalog,
                self.servers[j].cloud_rate_bps,
            );
        }
        self.deployed_this_interval = true;
        Ok(())
    }

    fn count_scale(&self) -> f64 {
        (self.config.deploy_interval * self.config.num_users) as f64
    }

    /// Observations for the deployment agents at an interval boundary,
    /// built from the request counts of the interval that just ended.
    pub fn deploy_observations(&self) -> Vec<DeployObs> {
        let cfg = &self.config;
        let (i_n, j_n) = (cfg.num_models, cfg.num_servers);
        let scale = self.count_scale();
        // Before the boundary deployment is applied the current matrix is
        // the previous interval's one.
        let prev = if self.deployed_this_interval {
            &self.prev_deployment
        } else {
            &self.deployment
        };
        let prev_vec = prev.as_features();
        (0..j_n)
            .map(|j| {
                let mut local = Vec::with_capacity(3 * i_n);
                local.extend(self.history.last_requests.iter().map(|&c| c as f64 / scale));
                local.extend((0..i_n).map(|i| self.history.last_server_requests[i * j_n + j] as f64 / scale));
                local.extend(std::iter::repeat_n(0.0, i_n));
                let mut global = local.clone();
                global.extend_from_slice(&prev_vec);
                DeployObs { local, global }
            })
            .collect()
    }

    pub fn user_observations(&self) -> Vec<UserObs> {
        let x = self.deployment.as_features();
        self.requests
            .iter()
            .map(|r| UserObs {
                model: r.model,
                batch: r.batch,
                deployment: x.clone(),
            })
            .collect()
    }

    pub fn normalized_model(&self, model: usize) -> f64 {
        (model + 1) as f64 / self.config.num_models as f64
    }

    pub fn normalized_batch(&self, batch: u32) -> f64 {
        batch as f64 / self.config.batch_range[1] as f64
    }

    pub fn normalized_split(&self, split: usize) -> f64 {
        (split + 1) as f64 / (self.max_layers + 1) as f64
    }

    /// `[n_mod, n_inp, vec(X)]`, length `2K + IJ`.
    pub fn user_global_observation(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.config.num_users + self.config.num_models * self.config.num_servers);
        v.extend(self.requests.iter().map(|r| self.normalized_model(r.model)));
        v.extend(self.requests.iter().map(|r| self.normalized_batch(r.batch)));
        v.extend(self.deployment.as_features());
        v
    }

    /// Per-server `[n_mod, n_inp, n_spl]` of length `3K`; users not
    /// associated with the server are zero.
    pub fn alloc_observations(&self, actions: &[UserAction]) -> Vec<Vec<f64>> {
        let k_n = self.config.num_users;
        (0..self.config.num_servers)
            .map(|j| {
                let mut v = vec![0.0; 3 * k_n];
                for (k, a) in actions.iter().enumerate() {
                    if a.server == j {
                        let r = &self.requests[k];
                        v[k] = self.normalized_model(r.model);
                        v[k_n + k] = self.normalized_batch(r.batch);
                        v[2 * k_n + k] = self.normalized_split(a.split);
                    }
                }
                v
            })
            .collect()
    }

    pub fn build_observations(&self, actions: &[UserAction]) -> ObservationBundle {
        ObservationBundle {
            deploy: self.deploy_observations(),
            user_local: self.user_observations(),
            user_global: self.user_global_observation(),
            alloc: self.alloc_observations(actions),
        }
    }

    /// Users associated with each server under `actions`.
    pub fn associations(&self, actions: &[UserAction]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.config.num_servers];
        for (k, a) in actions.iter().enumerate() {
            if a.server < out.len() {
                out[a.server].push(k);
            }
        }
        out
    }

    fn validate_actions(&self, user_actions: &[UserAction], alloc: &[AllocAction]) -> Result<(), EnvError> {
        let cfg = &self.config;
        let bad = |m: String| Err(EnvError::MalformedAction(m));
        if user_actions.len() != cfg.num_users {
            return bad(format!("expected {} user actions, got {}", cfg.num_users, user_actions.len()));
        }
        for (k, a) in user_actions.iter().enumerate() {
            if a.server >= cfg.num_servers {
                return bad(format!("user {k}: server {} out of range", a.server));
            }
            let layers = self.catalog[self.requests[k].model].layer_count();
            if a.split > layers {
                return bad(format!("user {k}: split {} beyond {layers} layers", a.split));
            }
        }
        if alloc.len() != cfg.num_servers {
            return bad(format!("expected {} allocation actions, got {}", cfg.num_servers, alloc.len()));
        }
        for (j, a) in alloc.iter().enumerate() {
            if a.comp.len() != cfg.num_users || a.band.len() != cfg.num_users {
                return bad(format!("server {j}: allocation weights must have {} entries", cfg.num_users));
            }
            if a.comp.iter().chain(&a.band).any(|w| !(w.is_finite() && *w >= 0.0)) {
                return bad(format!("server {j}: allocation weights must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Resource shares `(flops, hz)` per user after renormalizing each
    /// server's weights over its associated users.
    pub fn allocations(&self, user_actions: &[UserAction], alloc: &[AllocAction]) -> Result<Vec<(f64, f64)>, EnvError> {
        let mut out = vec![(0.0, 0.0); self.config.num_users];
        for (j, members) in self.associations(user_actions).iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let a = &alloc[j];
            let sc: f64 = members.iter().map(|&k| a.comp[k]).sum();
            let sb: f64 = members.iter().map(|&k| a.band[k]).sum();
            if !(sc > 0.0 && sb > 0.0) {
                return Err(EnvError::MalformedAction(format!(
                    "server {j}: weights of associated users sum to zero"
                )));
            }
            let s = &self.servers[j];
            let mut comp: Vec<f64> = members.iter().map(|&k| a.comp[k] / sc * s.compute_flops).collect();
            let mut band: Vec<f64> = members.iter().map(|&k| a.band[k] / sb * s.bandwidth_hz).collect();
            fit_to_capacity(&mut comp, s.compute_flops);
            fit_to_capacity(&mut band, s.bandwidth_hz);
            for (n, &k) in members.iter().enumerate() {
                out[k] = (comp[n], band[n]);
            }
        }
        Ok(out)
    }

    fn evaluate_user(&self, k: usize, action: UserAction, compute: f64, band: f64) -> Result<UserOutcome, EnvError> {
        let cfg = &self.config;
        let req = self.requests[k];
        let profile = &self.catalog[req.model];
        let user = &self.users[k];
        let server = &self.servers[action.server];
        let hit = self.deployment.get(req.model, action.server);
        let summary = profile.partition_summary(action.split)?;
        let g = self.gain(k, action.server);
        let noise = noise_power(band, &cfg.channel);
        let rate_down = shannon_rate(band, server.tx_power_w, g, noise);
        let rate_up = shannon_rate(band, user.tx_power_w, g, noise);
        let delay = delay_components(
            &summary,
            req.batch,
            rate_down,
            rate_up,
            user.compute_flops,
            compute,
            hit,
            cfg.weights.tau_fail,
        )?;
        let (energy_j, privacy) = if hit {
            (
                energy(&summary, req.batch, user.energy_coeff, user.tx_power_w, delay.upload_s),
                privacy_cost(summary.leakage, user.privacy_pref, req.batch, profile.raw_input_mb(), &cfg.weights),
            )
        } else {
            (0.0, 0.0)
        };
        let mut out = UserOutcome {
            request: req,
            action,
            hit,
            delay,
            energy_j,
            privacy,
            reward: 0.0,
            compute_flops: compute,
            bandwidth_hz: band,
        };
        out.reward = user_reward(&out, &cfg.weights);
        Ok(out)
    }

    /// Evaluates the current slot and advances to the next one.
    pub fn step(&mut self, user_actions: &[UserAction], alloc: &[AllocAction]) -> Result<SlotOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeOver(self.slot));
        }
        if self.deployment_due() {
            return Err(EnvError::DeploymentDue(self.slot));
        }
        self.validate_actions(user_actions, alloc)?;
        let shares = self.allocations(user_actions, alloc)?;
        let users = (0..self.config.num_users)
            .map(|k| self.evaluate_user(k, user_actions[k], shares[k].0, shares[k].1))
            .collect::<Result<Vec<_>, _>>()?;

        let cfg = Arc::clone(&self.config);
        let j_n = cfg.num_servers;
        let mut delays = vec![Vec::new(); j_n];
        for u in &users {
            let (i, j) = (u.request.model, u.action.server);
            delays[j].push(u.delay.total_s);
            self.history.requests[i] += 1;
            self.history.server_requests[i * j_n + j] += 1;
            self.history.cumulative_requests[i] += 1;
            self.history.last_used[i * j_n + j] = Some(self.slot as u64);
            if u.hit {
                self.history.hits[j] += 1;
            }
        }
        let alloc_rewards = delays.iter().map(|d| alloc_reward(d)).collect();

        let slot = self.slot;
        self.slot += 1;
        let mut deploy_rewards = None;
        if self.slot % cfg.deploy_interval == 0 {
            let h = &mut self.history;
            deploy_rewards = Some(
                (0..j_n)
                    .map(|j| deploy_reward(h.hits[j], self.migration_s[j], cfg.mu_hit, cfg.mu_mig))
                    .collect(),
            );
            h.last_requests = std::mem::replace(&mut h.requests, vec![0; cfg.num_models]);
            h.last_server_requests = std::mem::replace(&mut h.server_requests, vec![0; cfg.num_models * j_n]);
            h.hits.iter_mut().for_each(|x| *x = 0);
            self.deployed_this_interval = false;
        }
        let done = self.is_done();
        if !done {
            self.requests = sample_requests(&mut self.request_rng, &self.zipf, cfg.num_users, cfg.batch_range);
        }
        Ok(SlotOutcome {
            slot,
            users,
            alloc_rewards,
            deploy_rewards,
            done,
        })
    }
}

/// Trims the largest share until the left-to-right sum of `shares` is at
/// most `capacity`, absorbing rounding in the normalization.
fn fit_to_capacity(shares: &mut [f64], capacity: f64) {
    let Some(big) = (0..shares.len()).max_by(|&a, &b| shares[a].total_cmp(&shares[b])) else {
        return;
    };
    loop {
        let total: f64 = shares.iter().sum();
        if total <= capacity {
            return;
        }
        let trimmed = (shares[big] - (total - capacity)).max(0.0);
        shares[big] = if trimmed < shares[big] { trimmed } else { shares[big].next_down().max(0.0) };
    }
}

/// Streams per-user slot records as CSV.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "episode,slot,user,model,server,split,delay_s,energy_j,privacy,hit")?;
        Ok(Self { out })
    }

    pub fn record(&mut self, episode: usize, outcome: &SlotOutcome) -> std::io::Result<()> {
        for u in &outcome.users {
            writeln!(
                self.out,
                "{episode},{},{},{},{},{},{},{},{},{}",
                outcome.slot,
                u.request.user,
                u.request.model,
                u.action.server,
                u.action.split,
                u.delay.total_s,
                u.energy_j,
                u.privacy,
                u.hit as u8
            )?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
