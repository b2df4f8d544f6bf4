//! Episode collection and per-episode statistics.

use edgecollab_core::baselines::{equal_share, heuristic_macros, heuristic_user_actions};
use edgecollab_core::{AllocAction, AllocationRule, CriticScope, DeploymentRule, SlotOutcome, UserAction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alloc::AllocInput;
use crate::deploy::DeployMacro;
use crate::error::MarlError;
use crate::features::{alloc_critic_rows, alloc_input, user_critic_rows, user_input};
use crate::trainer::Trainer;
use crate::user::UserInput;

/// Stream tags mixed into derived seeds.
pub(crate) const TAG_TRAIN: u64 = 1;
pub(crate) const TAG_EVAL: u64 = 2;
pub(crate) const TAG_ACT: u64 = 3;
pub(crate) const TAG_INIT: u64 = 4;
pub(crate) const TAG_UPDATE: u64 = 5;

/// SplitMix64 folding of `parts` into `base`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Stochastic actions, records kept for updates.
    Train,
    /// Mode actions and noise-free allocation.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone)]
pub struct UserStep {
    pub input: UserInput,
    pub actions: Vec<UserAction>,
    pub log_probs: Vec<f64>,
    /// `K` critic rows, row-major.
    pub critic_rows: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Constraint cost per user: the realized delay.
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AllocStep {
    pub input: AllocInput,
    pub comp: Vec<Vec<f64>>,
    pub band: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub critic_rows: Vec<f64>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DeployStep {
    pub local: Vec<Vec<f64>>,
    /// Observation the critic sees (global or local per critic scope).
    pub critic_obs: Vec<Vec<f64>>,
    pub capacity: Vec<u64>,
    pub macros: Vec<DeployMacro>,
    pub rewards: Vec<f64>,
}

/// Per-user sums over an episode plus layer reward sums.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeStats {
    pub slots: usize,
    pub delay: Vec<f64>,
    pub energy: Vec<f64>,
    pub privacy: Vec<f64>,
    pub hits: Vec<usize>,
    /// Hit and deadline met.
    pub successes: Vec<usize>,
    pub user_reward: f64,
    pub alloc_reward: f64,
    pub alloc_records: usize,
    pub deploy_reward: f64,
    pub deploy_records: usize,
}

impl EpisodeStats {
    fn new(users: usize) -> Self {
        Self {
            delay: vec![0.0; users],
            energy: vec![0.0; users],
            privacy: vec![0.0; users],
            hits: vec![0; users],
            successes: vec![0; users],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub users: Vec<UserStep>,
    pub allocs: Vec<AllocStep>,
    pub deploys: Vec<DeployStep>,
    /// Slot outcomes, kept in evaluation mode only.
    pub outcomes: Vec<SlotOutcome>,
    pub stats: EpisodeStats,
}

impl Trainer {
    /// Runs one episode on a copy of the run's topology.
    pub fn rollout(&self, seed: u64, mode: Mode) -> Result<Episode, MarlError> {
        let spec = self.spec();
        let mut env = self.base_env().clone();
        env.new_episode(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_ACT]));
        let greedy = mode == Mode::Eval;
        let cfg = env.config().clone();
        let (i_n, j_n, k_n) = (cfg.num_models, cfg.num_servers, cfg.num_users);
        let centralized = spec.critic == CriticScope::Centralized;
        let nets = self.nets();
        let mut ep = Episode {
            users: Vec::new(),
            allocs: Vec::new(),
            deploys: Vec::new(),
            outcomes: Vec::new(),
            stats: EpisodeStats::new(k_n),
        };
        let sizes = env.model_sizes();
        while !env.is_done() {
            if env.deployment_due() {
                let macros: Vec<Vec<usize>> = if spec.deployment == DeploymentRule::Learned {
                    let obs = env.deploy_observations();
                    let capacity: Vec<u64> = env.servers().iter().map(|s| s.storage_bytes).collect();
                    let sampled: Vec<DeployMacro> = (0..j_n)
                        .map(|j| nets.deploy.sample_deploy_macro(&obs[j].local, capacity[j], &sizes, &mut rng, greedy))
                        .collect();
                    let models = sampled.iter().map(|m| m.models.clone()).collect();
                    ep.deploys.push(DeployStep {
                        local: obs.iter().map(|o| o.local.clone()).collect(),
                        critic_obs: obs
                            .into_iter()
                            .map(|o| if centralized { o.global } else { o.local })
                            .collect(),
                        capacity,
                        macros: sampled,
                        rewards: vec![0.0; j_n],
                    });
                    models
                } else {
                    heuristic_macros(&env, spec.deployment)
                };
                env.apply_deployment(&macros)?;
            }

            let mut user_step = None;
            let actions: Vec<UserAction> = if spec.learned_users() {
                let input = user_input(&env);
                let samples = nets.user.act(&input, &mut rng, greedy);
                let actions: Vec<UserAction> = samples.iter().map(|s| s.action).collect();
                user_step = Some(UserStep {
                    input,
                    actions: actions.clone(),
                    log_probs: samples.iter().map(|s| s.log_prob).collect(),
                    critic_rows: user_critic_rows(&env, centralized),
                    rewards: Vec::new(),
                    costs: Vec::new(),
                });
                actions
            } else {
                heuristic_user_actions(&env, &spec)
            };

            let mut alloc_step = None;
            let allocs: Vec<AllocAction> = if spec.allocation == AllocationRule::Learned {
                let input = alloc_input(&env, &actions);
                let samples = nets.alloc.act(&input, &mut rng, !greedy);
                let critic_rows = alloc_critic_rows(&input, j_n);
                let allocs = samples.iter().map(|s| s.action.clone()).collect();
                alloc_step = Some(AllocStep {
                    input,
                    comp: samples.iter().map(|s| s.comp_scores.clone()).collect(),
                    band: samples.iter().map(|s| s.band_scores.clone()).collect(),
                    log_probs: samples.iter().map(|s| s.log_prob).collect(),
                    critic_rows,
                    rewards: Vec::new(),
                });
                allocs
            } else {
                equal_share(&env)
            };

            let out = env.step(&actions, &allocs)?;
            let st = &mut ep.stats;
            st.slots += 1;
            for (k, u) in out.users.iter().enumerate() {
                st.delay[k] += u.delay.total_s;
                st.energy[k] += u.energy_j;
                st.privacy[k] += u.privacy;
                st.hits[k] += usize::from(u.hit);
                st.successes[k] += usize::from(u.hit && u.meets_deadline(cfg.weights.tau_bar));
                st.user_reward += u.reward;
            }
            st.alloc_reward += out.alloc_rewards.iter().sum::<f64>();
            st.alloc_records += j_n;
            if let Some(mut s) = user_step {
                s.rewards = out.users.iter().map(|u| u.reward).collect();
                s.costs = out.constraint_costs();
                if mode == Mode::Train {
                    ep.users.push(s);
                }
            }
            if let Some(mut s) = alloc_step {
                s.rewards = out.alloc_rewards.clone();
                if mode == Mode::Train {
                    ep.allocs.push(s);
                }
            }
            if let Some(r) = &out.deploy_rewards {
                st.deploy_reward += r.iter().sum::<f64>();
                st.deploy_records += r.len();
                if let Some(d) = ep.deploys.last_mut() {
                    d.rewards = r.clone();
                }
            }
            if mode == Mode::Eval {
                ep.outcomes.push(out);
            }
        }
        if mode == Mode::Eval {
            ep.deploys.clear();
        }
        debug_assert!(ep.users.iter().all(|s| s.actions.len() == k_n));
        debug_assert!(ep.deploys.iter().all(|d| d.local.iter().all(|o| o.len() == 3 * i_n)));
        Ok(ep)
    }
}
