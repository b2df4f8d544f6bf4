//! Heuristic decision rules and the named algorithm configurations they
//! compose into.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{AllocAction, EdgeEnv, UserAction};
use crate::profiles::ModelProfile;
use crate::radio::{noise_power, shannon_rate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssociationRule {
    ChannelStrongest,
    ChannelStrongestWithModel,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionRule {
    FullLocal,
    FullEdge,
    GreedyDeepest,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationRule {
    EqualShare,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeploymentRule {
    Popularity,
    Lru,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintHandling {
    None,
    Lagrangian,
}

/// Which observations the critics see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticScope {
    Centralized,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub association: AssociationRule,
    pub partition: PartitionRule,
    pub allocation: AllocationRule,
    pub deployment: DeploymentRule,
    pub constraint: ConstraintHandling,
    pub critic: CriticScope,
}

impl BaselineSpec {
    /// The user layer is a trained policy (association and partition together).
    pub fn learned_users(&self) -> bool {
        self.association == AssociationRule::Learned
    }

    pub fn needs_training(&self) -> bool {
        self.learned_users()
            || self.allocation == AllocationRule::Learned
            || self.deployment == DeploymentRule::Learned
    }

    /// The named algorithm this combination corresponds to, if any.
    pub fn named(&self) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.spec() == *self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    HcMappoL,
    LocalOnly,
    EdgeOnly,
    Greedy,
    HeuristicMappoL,
    HIppo,
    HcIppoL,
    HMappo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::HcMappoL,
        Algorithm::LocalOnly,
        Algorithm::EdgeOnly,
        Algorithm::Greedy,
        Algorithm::HeuristicMappoL,
        Algorithm::HIppo,
        Algorithm::HcIppoL,
        Algorithm::HMappo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HcMappoL => "hc-mappo-l",
            Algorithm::LocalOnly => "local-only",
            Algorithm::EdgeOnly => "edge-only",
            Algorithm::Greedy => "greedy",
            Algorithm::HeuristicMappoL => "heuristic-mappo-l",
            Algorithm::HIppo => "h-ippo",
            Algorithm::HcIppoL => "hc-ippo-l",
            Algorithm::HMappo => "h-mappo",
        }
    }

    pub fn spec(self) -> BaselineSpec {
        use AllocationRule as A;
        use AssociationRule as S;
        use ConstraintHandling as C;
        use CriticScope as V;
        use DeploymentRule as D;
        use PartitionRule as P;
        let learned = BaselineSpec {
            association: S::Learned,
            partition: P::Learned,
            allocation: A::Learned,
            deployment: D::Learned,
            constraint: C::Lagrangian,
            critic: V::Centralized,
        };
        let heuristic = BaselineSpec {
            association: S::ChannelStrongest,
            partition: P::FullLocal,
            allocation: A::EqualShare,
            deployment: D::Popularity,
            constraint: C::None,
            critic: V::Centralized,
        };
        match self {
            Algorithm::HcMappoL => learned,
            Algorithm::LocalOnly => heuristic,
            Algorithm::EdgeOnly => BaselineSpec {
                partition: P::FullEdge,
                ..heuristic
            },
            Algorithm::Greedy => BaselineSpec {
                association: S::ChannelStrongestWithModel,
                partition: P::GreedyDeepest,
                ..heuristic
            },
            Algorithm::HeuristicMappoL => BaselineSpec {
                allocation: A::EqualShare,
                deployment: D::Lru,
                ..learned
            },
            Algorithm::HIppo => BaselineSpec {
                constraint: C::None,
                critic: V::Local,
                ..learned
            },
            Algorithm::HcIppoL => BaselineSpec {
                critic: V::Local,
                ..learned
            },
            Algorithm::HMappo => BaselineSpec {
                constraint: C::None,
                ..learned
            },
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Greedy fill in descending request count; ties go to the lower model id.
/// Models that do not fit are skipped and the scan continues.
pub fn popularity_deploy(counts: &[u64], storage: u64, sizes: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    fill(order, storage, sizes)
}

/// Keeps the most recently used models that fit, evicting the least recent
/// first. Never-used models rank below every used one, ordered by id.
pub fn lru_deploy(last_used: &[Option<u64>], storage: u64, sizes: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..last_used.len()).collect();
    order.sort_by(|&a, &b| last_used[b].cmp(&last_used[a]).then(a.cmp(&b)));
    fill(order, storage, sizes)
}

fn fill(order: Vec<usize>, storage: u64, sizes: &[u64]) -> Vec<usize> {
    let mut left = storage;
    let mut chosen = Vec::new();
    for i in order {
        if sizes[i] <= left {
            left -= sizes[i];
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

pub fn popularity_macros(env: &EdgeEnv) -> Vec<Vec<usize>> {
    let sizes = env.model_sizes();
    (0..env.servers().len())
        .map(|j| popularity_deploy(env.cumulative_requests(), env.servers()[j].storage_bytes, &sizes))
        .collect()
}

pub fn lru_macros(env: &EdgeEnv) -> Vec<Vec<usize>> {
    let sizes = env.model_sizes();
    let models = env.catalog().len();
    (0..env.servers().len())
        .map(|j| {
            let last: Vec<Option<u64>> = (0..models).map(|i| env.last_used(j, i)).collect();
            lru_deploy(&last, env.servers()[j].storage_bytes, &sizes)
        })
        .collect()
}

/// Strongest-gain server; ties go to the lower index.
pub fn strongest_server(env: &EdgeEnv, user: usize) -> usize {
    strongest_among(env, user, 0..env.servers().len()).expect("at least one server")
}

fn strongest_among(env: &EdgeEnv, user: usize, servers: impl Iterator<Item = usize>) -> Option<usize> {
    servers.fold(None, |best: Option<usize>, j| match best {
        Some(b) if env.gain(user, b) >= env.gain(user, j) => Some(b),
        _ => Some(j),
    })
}

/// Strongest-gain server holding the requested model, else strongest overall.
pub fn strongest_server_with_model(env: &EdgeEnv, user: usize) -> usize {
    let model = env.requests()[user].model;
    let d = env.deployment();
    strongest_among(env, user, (0..env.servers().len()).filter(|&j| d.get(model, j)))
        .unwrap_or_else(|| strongest_server(env, user))
}

/// Delay at every partition point given the resources a user would get.
#[allow(clippy::too_many_arguments)]
pub fn estimated_delays(
    profile: &ModelProfile,
    batch: u32,
    rate_down: f64,
    rate_up: f64,
    f_user: f64,
    f_edge: f64,
) -> Vec<f64> {
    let b = batch as f64;
    let div = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    (0..=profile.layer_count())
        .map(|l| {
            let s = profile.partition_summary(l).expect("l within range");
            div(8.0 * s.download_bytes as f64, rate_down)
                + div(b * s.local_flops as f64, f_user)
                + div(8.0 * b * s.upload_bytes as f64, rate_up)
                + div(b * s.edge_flops as f64, f_edge)
        })
        .collect()
}

/// Deepest point whose delay is within `tau_bar`, or the fastest point if
/// none is.
pub fn deepest_feasible(delays: &[f64], tau_bar: f64) -> usize {
    if let Some(l) = delays.iter().rposition(|&d| d <= tau_bar) {
        return l;
    }
    delays
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bd), (l, &d)| if d < bd { (l, d) } else { (bi, bd) })
        .0
}

/// Association for every user under `rule` (learned rules are not handled here).
pub fn heuristic_association(env: &EdgeEnv, rule: AssociationRule) -> Vec<usize> {
    (0..env.users().len())
        .map(|k| match rule {
            AssociationRule::ChannelStrongestWithModel => strongest_server_with_model(env, k),
            _ => strongest_server(env, k),
        })
        .collect()
}

/// Greedy split for user `k` on `server`, estimating equal shares over
/// `members` users on that server.
pub fn greedy_split(env: &EdgeEnv, k: usize, server: usize, members: usize) -> usize {
    let req = env.requests()[k];
    let s = &env.servers()[server];
    let u = &env.users()[k];
    let n = members.max(1) as f64;
    let band = s.bandwidth_hz / n;
    let g = env.gain(k, server);
    let noise = noise_power(band, &env.config().channel);
    let delays = estimated_delays(
        &env.catalog()[req.model],
        req.batch,
        shannon_rate(band, s.tx_power_w, g, noise),
        shannon_rate(band, u.tx_power_w, g, noise),
        u.compute_flops,
        s.compute_flops / n,
    );
    deepest_feasible(&delays, env.config().weights.tau_bar)
}

/// Decisions of a fully heuristic user layer.
pub fn heuristic_user_actions(env: &EdgeEnv, spec: &BaselineSpec) -> Vec<UserAction> {
    let servers = heuristic_association(env, spec.association);
    let mut members = vec![0usize; env.servers().len()];
    for &j in &servers {
        members[j] += 1;
    }
    servers
        .iter()
        .enumerate()
        .map(|(k, &server)| {
            let layers = env.catalog()[env.requests()[k].model].layer_count();
            let split = match spec.partition {
                PartitionRule::FullLocal => layers,
                PartitionRule::FullEdge => 0,
                PartitionRule::GreedyDeepest | PartitionRule::Learned => {
                    greedy_split(env, k, server, members[server])
                }
            };
            UserAction { server, split }
        })
        .collect()
}

pub fn equal_share(env: &EdgeEnv) -> Vec<AllocAction> {
    vec![AllocAction::uniform(env.users().len()); env.servers().len()]
}

pub fn heuristic_macros(env: &EdgeEnv, rule: DeploymentRule) -> Vec<Vec<usize>> {
    match rule {
        DeploymentRule::Lru => lru_macros(env),
        _ => popularity_macros(env),
    }
}
