//! The hierarchical constrained trainer: rollouts, advantages, the dual
//! update and PPO updates for the three agent layers.

use std::sync::Arc;

use edgecollab_core::{
    AllocationRule, BaselineSpec, ConstraintHandling, CriticScope, DeploymentRule, EdgeEnv, ModelProfile, SlotOutcome, SystemConfig,
};
use edgecollab_neural::{Adam, Checkpoint, Graph, ParamStore, Tensor2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{AllocInput, AllocPolicy};
use crate::critic::Critic;
use crate::deploy::{macro_value, DeployPolicy};
use crate::dims::Dims;
use crate::error::MarlError;
use crate::features::{deploy_critic_row, user_critic_width};
use crate::gae::{gae, normalize};
use crate::lagrange::LagrangeState;
use crate::ppo::ppo_clip_graph;
use crate::rollout::{derive_seed, Episode, EpisodeStats, Execution, Mode, TAG_EVAL, TAG_INIT, TAG_TRAIN, TAG_UPDATE};
use crate::user::{UserInput, UserPolicy};
use crate::valuenorm::ValueNorm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Parallel environment instances per iteration.
    pub num_envs: usize,
    pub iterations: usize,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub entropy_user: f64,
    pub entropy_deploy: f64,
    pub entropy_alloc: f64,
    pub lambda_init: f64,
    pub lambda_lr: f64,
    pub lambda_max: f64,
    pub hidden: usize,
    pub embed: usize,
    pub attn: usize,
    pub max_grad_norm: f64,
    pub alloc_log_std_init: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_envs: 4,
            iterations: 300,
            lr: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatches: 4,
            entropy_user: 0.05,
            entropy_deploy: 0.25,
            entropy_alloc: 0.01,
            lambda_init: 0.01,
            lambda_lr: 0.01,
            lambda_max: 100.0,
            hidden: 64,
            embed: 8,
            attn: 16,
            max_grad_norm: 10.0,
            alloc_log_std_init: -1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let bad = |m: &str| Err(MarlError::Config(m.to_string()));
        if self.num_envs == 0 || self.epochs == 0 || self.minibatches == 0 {
            return bad("num_envs, epochs and minibatches must be positive");
        }
        if self.hidden == 0 || self.embed == 0 || self.attn == 0 {
            return bad("network widths must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.lr >= 0.0 && self.lambda_lr >= 0.0 && self.clip > 0.0 && self.lambda_max >= 0.0) {
            return bad("learning rates must be non-negative and clip positive");
        }
        if !(0.0..=self.lambda_max).contains(&self.lambda_init) {
            return bad("lambda_init must lie within [0, lambda_max]");
        }
        Ok(())
    }
}

/// All networks of the three layers.
#[derive(Debug, Clone)]
pub struct Nets {
    pub user: UserPolicy,
    pub user_critic: Critic,
    pub cost_critic: Critic,
    pub deploy: DeployPolicy,
    pub deploy_critic: Critic,
    pub alloc: AllocPolicy,
    pub alloc_critic: Critic,
}

impl Nets {
    fn stores(&self) -> [(&'static str, &ParamStore); 7] {
        [
            ("user.", &self.user.store),
            ("user_critic.", &self.user_critic.store),
            ("cost_critic.", &self.cost_critic.store),
            ("deploy.", &self.deploy.store),
            ("deploy_critic.", &self.deploy_critic.store),
            ("alloc.", &self.alloc.store),
            ("alloc_critic.", &self.alloc_critic.store),
        ]
    }

    fn stores_mut(&mut self) -> [(&'static str, &mut ParamStore); 7] {
        [
            ("user.", &mut self.user.store),
            ("user_critic.", &mut self.user_critic.store),
            ("cost_critic.", &mut self.cost_critic.store),
            ("deploy.", &mut self.deploy.store),
            ("deploy_critic.", &mut self.deploy_critic.store),
            ("alloc.", &mut self.alloc.store),
            ("alloc_critic.", &mut self.alloc_critic.store),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Optimizers {
    user: Adam,
    user_critic: Adam,
    cost_critic: Adam,
    deploy: Adam,
    deploy_critic: Adam,
    alloc: Adam,
    alloc_critic: Adam,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Norms {
    user: ValueNorm,
    cost: ValueNorm,
    deploy: ValueNorm,
    alloc: ValueNorm,
}

/// Per-iteration training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub deploy_reward: f64,
    pub user_reward: f64,
    pub alloc_reward: f64,
    /// Mean per-user per-slot delay, the dual's constraint estimate.
    pub mean_delay: f64,
    pub lambda_before: f64,
    pub lambda: f64,
    pub mean_energy: f64,
    pub mean_privacy: f64,
    pub hit_rate: f64,
    pub success_rate: f64,
}

/// Greedy-mode evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean_delay: f64,
    pub mean_energy: f64,
    pub mean_privacy: f64,
    /// `μ1·privacy + μ2·energy` per user and slot.
    pub mean_cost: f64,
    pub hit_rate: f64,
    /// Cache hit with the deadline met.
    pub success_rate: f64,
    pub mean_user_reward: f64,
    pub per_user_cost: Vec<f64>,
    pub per_user_delay: Vec<f64>,
}

/// Pooled statistics of several episodes.
fn pool(stats: &[&EpisodeStats]) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, usize) {
    let users = stats.first().map_or(0, |s| s.delay.len());
    let slots: usize = stats.iter().map(|s| s.slots).sum();
    let mut delay = vec![0.0; users];
    let mut energy = vec![0.0; users];
    let mut privacy = vec![0.0; users];
    let (mut hits, mut succ) = (0usize, 0usize);
    for s in stats {
        for k in 0..users {
            delay[k] += s.delay[k];
            energy[k] += s.energy[k];
            privacy[k] += s.privacy[k];
            hits += s.hits[k];
            succ += s.successes[k];
        }
    }
    let denom = (slots.max(1)) as f64;
    for v in [&mut delay, &mut energy, &mut privacy] {
        v.iter_mut().for_each(|x| *x /= denom);
    }
    let n = (slots * users).max(1) as f64;
    (delay, energy, privacy, hits as f64 / n, succ as f64 / n, slots)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn rows_tensor(flat: Vec<f64>, cols: usize) -> Tensor2 {
    let rows = if cols == 0 { 0 } else { flat.len() / cols };
    Tensor2::from_vec(rows, cols, flat)
}

fn select_rows(t: &Tensor2, idx: &[usize]) -> Tensor2 {
    let cols = t.cols();
    let mut out = Tensor2::zeros(idx.len(), cols);
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(t.row(i));
    }
    out
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn apply(store: &mut ParamStore, opt: &mut Adam, max_norm: f64) {
    store.clip_grad_norm(max_norm);
    opt.step(store);
}

/// GAE over `seqs` independent sequences laid out as `seq * len + t`,
/// bootstrapping each truncated sequence with its last value.
fn gae_grid(rewards: &[f64], values: &[f64], seqs: usize, len: usize, gamma: f64, lam: f64) -> (Vec<f64>, Vec<f64>) {
    let mut adv = vec![0.0; seqs * len];
    let mut ret = vec![0.0; seqs * len];
    for s in 0..seqs {
        let r = &rewards[s * len..(s + 1) * len];
        let v = &values[s * len..(s + 1) * len];
        let a = gae(r, v, *v.last().unwrap_or(&0.0), gamma, lam).expect("equal lengths");
        adv[s * len..(s + 1) * len].copy_from_slice(&a.advantages);
        ret[s * len..(s + 1) * len].copy_from_slice(&a.returns);
    }
    (adv, ret)
}

pub struct Trainer {
    spec: BaselineSpec,
    hp: TrainConfig,
    base_env: EdgeEnv,
    dims: Dims,
    seed: u64,
    nets: Nets,
    opt: Optimizers,
    norms: Norms,
    pub lagrange: LagrangeState,
    rng: ChaCha8Rng,
    iteration: usize,
    pub execution: Execution,
}

/// Applies the algorithm's reward shaping: unconstrained variants drop the
/// delay-violation term.
pub fn effective_config(cfg: &SystemConfig, spec: &BaselineSpec) -> SystemConfig {
    let mut c = cfg.clone();
    if spec.constraint == ConstraintHandling::None {
        c.weights.mu3 = 0.0;
    }
    c
}

impl Trainer {
    /// Builds the environment topology for `seed` and fresh networks.
    pub fn new(
        cfg: &SystemConfig,
        catalog: Arc<Vec<ModelProfile>>,
        spec: BaselineSpec,
        hp: TrainConfig,
        seed: u64,
    ) -> Result<Self, MarlError> {
        hp.validate()?;
        let cfg = Arc::new(effective_config(cfg, &spec));
        let base_env = EdgeEnv::new(Arc::clone(&cfg), catalog, seed)?;
        let dims = Dims::of(&base_env).with_hidden(hp.hidden).with_embed(hp.embed, hp.attn);
        let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_INIT]));
        let (i_n, j_n, k_n) = (dims.models, dims.servers, dims.users);
        let centralized = spec.critic == CriticScope::Centralized;
        let uw = user_critic_width(k_n, i_n, j_n, centralized);
        let dw = 3 * i_n + if centralized { i_n * j_n } else { 0 } + j_n;
        let nets = Nets {
            user: UserPolicy::new(dims, &mut init),
            user_critic: Critic::new("v", uw, hp.hidden, &mut init),
            cost_critic: Critic::new("v", uw, hp.hidden, &mut init),
            deploy: DeployPolicy::new(dims, &mut init),
            deploy_critic: Critic::new("v", dw, hp.hidden, &mut init),
            alloc: AllocPolicy::new(dims, hp.alloc_log_std_init, &mut init),
            alloc_critic: Critic::new("v", 3 * k_n + j_n, hp.hidden, &mut init),
        };
        let opt = Optimizers {
            user: Adam::new(&nets.user.store, hp.lr),
            user_critic: Adam::new(&nets.user_critic.store, hp.lr),
            cost_critic: Adam::new(&nets.cost_critic.store, hp.lr),
            deploy: Adam::new(&nets.deploy.store, hp.lr),
            deploy_critic: Adam::new(&nets.deploy_critic.store, hp.lr),
            alloc: Adam::new(&nets.alloc.store, hp.lr),
            alloc_critic: Adam::new(&nets.alloc_critic.store, hp.lr),
        };
        let tau_bar = cfg.weights.tau_bar;
        let lagrange = match spec.constraint {
            ConstraintHandling::Lagrangian => {
                let mut l = LagrangeState::new(hp.lambda_init, hp.lambda_lr, tau_bar);
                l.bounds = [0.0, hp.lambda_max];
                l
            }
            ConstraintHandling::None => LagrangeState::frozen_at_zero(tau_bar),
        };
        Ok(Self {
            spec,
            hp,
            base_env,
            dims,
            seed,
            nets,
            opt,
            norms: Norms::default(),
            lagrange,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_UPDATE])),
            iteration: 0,
            execution: Execution::default(),
        })
    }

    pub fn spec(&self) -> BaselineSpec {
        self.spec
    }

    pub fn hyperparams(&self) -> &TrainConfig {
        &self.hp
    }

    pub fn base_env(&self) -> &EdgeEnv {
        &self.base_env
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn nets(&self) -> &Nets {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut Nets {
        &mut self.nets
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Rollouts for `seeds`, in seed order regardless of execution mode.
    pub fn collect(&self, seeds: &[u64], mode: Mode, exec: Execution) -> Result<Vec<Episode>, MarlError> {
        #[cfg(feature = "parallel")]
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return seeds.par_iter().map(|&s| self.rollout(s, mode)).collect();
        }
        let _ = exec;
        seeds.iter().map(|&s| self.rollout(s, mode)).collect()
    }

    /// Episode seeds of training iteration `iteration`.
    pub fn train_seeds(&self, iteration: usize) -> Vec<u64> {
        (0..self.hp.num_envs)
            .map(|n| derive_seed(self.seed, &[TAG_TRAIN, iteration as u64, n as u64]))
            .collect()
    }

    /// One iteration: collect episodes, update every learned layer, then
    /// take a dual step on the measured mean delay.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics, MarlError> {
        let seeds = self.train_seeds(self.iteration);
        let episodes = self.collect(&seeds, Mode::Train, self.execution)?;
        let stats: Vec<&EpisodeStats> = episodes.iter().map(|e| &e.stats).collect();
        let (delay, energy, privacy, hit_rate, success_rate, slots) = pool(&stats);
        let users = self.dims.users as f64;
        let j_hat = mean(&delay);
        let sum = |f: &dyn Fn(&EpisodeStats) -> f64| stats.iter().map(|s| f(s)).sum::<f64>();
        let alloc_n = sum(&|s| s.alloc_records as f64).max(1.0);
        let deploy_n = sum(&|s| s.deploy_records as f64).max(1.0);
        let lambda_before = self.lagrange.lambda;

        if self.spec.learned_users() {
            self.update_users(&episodes);
        }
        if self.spec.deployment == DeploymentRule::Learned {
            self.update_deploy(&episodes);
        }
        if self.spec.allocation == AllocationRule::Learned {
            self.update_alloc(&episodes);
        }
        let lambda = self.lagrange.update(j_hat);
        let m = IterationMetrics {
            iteration: self.iteration,
            deploy_reward: sum(&|s| s.deploy_reward) / deploy_n,
            user_reward: sum(&|s| s.user_reward) / (slots.max(1) as f64 * users),
            alloc_reward: sum(&|s| s.alloc_reward) / alloc_n,
            mean_delay: j_hat,
            lambda_before,
            lambda,
            mean_energy: mean(&energy),
            mean_privacy: mean(&privacy),
            hit_rate,
            success_rate,
        };
        self.iteration += 1;
        Ok(m)
    }

    /// Shuffled minibatch index sets covering `0..n`.
    fn minibatches(&mut self, n: usize) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.rng);
        let m = self.hp.minibatches.min(n.max(1));
        let size = n.div_ceil(m);
        idx.chunks(size.max(1)).map(|c| c.to_vec()).collect()
    }

    fn update_users(&mut self, episodes: &[Episode]) {
        let hp = self.hp.clone();
        let k_n = self.dims.users;
        let steps = episodes.first().map_or(0, |e| e.users.len());
        if steps == 0 {
            return;
        }
        // Records are laid out as ((episode * K) + user) * T + t so that each
        // agent's trajectory is contiguous.
        let seqs = episodes.len() * k_n;
        let n = seqs * steps;
        let order: Vec<(usize, usize, usize)> = (0..episodes.len())
            .flat_map(|e| (0..k_n).flat_map(move |k| (0..steps).map(move |t| (e, k, t))))
            .collect();
        let width = self.nets.user_critic.inputs();
        let mut crit = Vec::with_capacity(n * width);
        let mut rewards = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        let mut old_logp = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n);
        let mut parts = Vec::with_capacity(n);
        for &(e, k, t) in &order {
            let s = &episodes[e].users[t];
            crit.extend_from_slice(&s.critic_rows[k * width..(k + 1) * width]);
            rewards.push(s.rewards[k]);
            costs.push(s.costs[k]);
            old_logp.push(s.log_probs[k]);
            actions.push(s.actions[k]);
            parts.push(s.input.select(&[k]));
        }
        let input = UserInput::concat(&parts);
        let crit = rows_tensor(crit, width);

        let vr: Vec<f64> = self.nets.user_critic.values(&crit).iter().map(|&v| self.norms.user.denormalize(v)).collect();
        let vc: Vec<f64> = self.nets.cost_critic.values(&crit).iter().map(|&v| self.norms.cost.denormalize(v)).collect();
        let (adv_r, ret_r) = gae_grid(&rewards, &vr, seqs, steps, hp.gamma, hp.gae_lambda);
        let (adv_c, ret_c) = gae_grid(&costs, &vc, seqs, steps, hp.gamma, hp.gae_lambda);
        self.norms.user.update(&ret_r);
        self.norms.cost.update(&ret_c);
        let tgt_r: Vec<f64> = ret_r.iter().map(|&x| self.norms.user.normalize(x)).collect();
        let tgt_c: Vec<f64> = ret_c.iter().map(|&x| self.norms.cost.normalize(x)).collect();
        let lambda = self.lagrange.lambda;
        let adv: Vec<f64> = normalize(&adv_r)
            .iter()
            .zip(&normalize(&adv_c))
            .map(|(r, c)| (r - lambda * c) / (1.0 + lambda))
            .collect();

        for _ in 0..hp.epochs {
            for mb in self.minibatches(n) {
                let inp = input.select(&mb);
                let acts = pick(&actions, &mb);
                let mut g = Graph::new();
                let (logp, ent) = self.nets.user.evaluate(&mut g, &inp, &acts);
                let obj = ppo_clip_graph(&mut g, logp, &pick(&old_logp, &mb), &pick(&adv, &mb), hp.clip);
                let ent = g.mean_all(ent);
                let bonus = g.scale(ent, hp.entropy_user);
                let gain = g.add(obj, bonus);
                let loss = g.scale(gain, -1.0);
                self.nets.user.store.zero_grad();
                g.backward(loss, &mut self.nets.user.store);
                apply(&mut self.nets.user.store, &mut self.opt.user, hp.max_grad_norm);

                let rows = select_rows(&crit, &mb);
                for (critic, opt, tgt) in [
                    (&mut self.nets.user_critic, &mut self.opt.user_critic, &tgt_r),
                    (&mut self.nets.cost_critic, &mut self.opt.cost_critic, &tgt_c),
                ] {
                    let mut g = Graph::new();
                    let loss = critic.loss(&mut g, &rows, &pick(tgt, &mb));
                    critic.store.zero_grad();
                    g.backward(loss, &mut critic.store);
                    apply(&mut critic.store, opt, hp.max_grad_norm);
                }
            }
        }
    }

    fn update_deploy(&mut self, episodes: &[Episode]) {
        let hp = self.hp.clone();
        let (i_n, j_n) = (self.dims.models, self.dims.servers);
        let steps = episodes.first().map_or(0, |e| e.deploys.len());
        if steps == 0 {
            return;
        }
        let seqs = episodes.len() * j_n;
        let n = seqs * steps;
        let mut local = Vec::with_capacity(n);
        let mut capacity = Vec::with_capacity(n);
        let mut macros = Vec::with_capacity(n);
        let mut old_logp = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        // Critic rows of every decoding step, with the owning record.
        let mut crit = Vec::new();
        let mut owner = Vec::new();
        for e in episodes {
            for j in 0..j_n {
                for d in &e.deploys {
                    let rec = local.len();
                    let m = &d.macros[j];
                    for t in 0..m.models.len().max(1) {
                        let chosen = &m.models[..t.min(m.models.len())];
                        crit.extend(deploy_critic_row(&d.critic_obs[j], i_n, chosen, j, j_n));
                        owner.push(rec);
                    }
                    local.push(d.local[j].clone());
                    capacity.push(d.capacity[j]);
                    macros.push(m.models.clone());
                    old_logp.push(m.log_prob);
                    rewards.push(d.rewards[j]);
                }
            }
        }
        let width = self.nets.deploy_critic.inputs();
        let crit = rows_tensor(crit, width);
        let step_values = self.nets.deploy_critic.values(&crit);
        let mut grouped = vec![Vec::new(); n];
        for (v, &o) in step_values.iter().zip(&owner) {
            grouped[o].push(self.norms.deploy.denormalize(*v));
        }
        let values: Vec<f64> = grouped
            .iter()
            .zip(&macros)
            .map(|(s, m)| if m.is_empty() { macro_value(&[], s[0]) } else { macro_value(s, s[0]) })
            .collect();
        let (adv, ret) = gae_grid(&rewards, &values, seqs, steps, hp.gamma, hp.gae_lambda);
        self.norms.deploy.update(&ret);
        let adv = normalize(&adv);
        let step_targets: Vec<f64> = owner.iter().map(|&o| self.norms.deploy.normalize(ret[o])).collect();
        let sizes = self.base_env.model_sizes();

        for _ in 0..hp.epochs {
            for mb in self.minibatches(n) {
                let mut g = Graph::new();
                let (logp, ent) = self.nets.deploy.evaluate(
                    &mut g,
                    &pick(&local, &mb),
                    &pick(&capacity, &mb),
                    &sizes,
                    &pick(&macros, &mb),
                );
                let obj = ppo_clip_graph(&mut g, logp, &pick(&old_logp, &mb), &pick(&adv, &mb), hp.clip);
                let ent = g.mean_all(ent);
                let bonus = g.scale(ent, hp.entropy_deploy);
                let gain = g.add(obj, bonus);
                let loss = g.scale(gain, -1.0);
                self.nets.deploy.store.zero_grad();
                g.backward(loss, &mut self.nets.deploy.store);
                apply(&mut self.nets.deploy.store, &mut self.opt.deploy, hp.max_grad_norm);

                let in_mb: Vec<bool> = {
                    let mut f = vec![false; n];
                    mb.iter().for_each(|&i| f[i] = true);
                    f
                };
                let rows_idx: Vec<usize> = (0..owner.len()).filter(|&r| in_mb[owner[r]]).collect();
                let rows = select_rows(&crit, &rows_idx);
                let mut g = Graph::new();
                let loss = self.nets.deploy_critic.loss(&mut g, &rows, &pick(&step_targets, &rows_idx));
                self.nets.deploy_critic.store.zero_grad();
                g.backward(loss, &mut self.nets.deploy_critic.store);
                apply(&mut self.nets.deploy_critic.store, &mut self.opt.deploy_critic, hp.max_grad_norm);
            }
        }
    }

    fn update_alloc(&mut self, episodes: &[Episode]) {
        let hp = self.hp.clone();
        let j_n = self.dims.servers;
        let steps = episodes.first().map_or(0, |e| e.allocs.len());
        if steps == 0 {
            return;
        }
        let seqs = episodes.len() * j_n;
        let n = seqs * steps;
        let width = self.nets.alloc_critic.inputs();
        let mut parts = Vec::with_capacity(n);
        let mut comp = Vec::with_capacity(n);
        let mut band = Vec::with_capacity(n);
        let mut old_logp = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut crit = Vec::with_capacity(n * width);
        for e in episodes {
            for j in 0..j_n {
                for s in &e.allocs {
                    parts.push(s.input.select(&[j]));
                    comp.push(s.comp[j].clone());
                    band.push(s.band[j].clone());
                    old_logp.push(s.log_probs[j]);
                    rewards.push(s.rewards[j]);
                    crit.extend_from_slice(&s.critic_rows[j * width..(j + 1) * width]);
                }
            }
        }
        let input = AllocInput::concat(&parts);
        let crit = rows_tensor(crit, width);
        let values: Vec<f64> = self.nets.alloc_critic.values(&crit).iter().map(|&v| self.norms.alloc.denormalize(v)).collect();
        let (adv, ret) = gae_grid(&rewards, &values, seqs, steps, hp.gamma, hp.gae_lambda);
        self.norms.alloc.update(&ret);
        let adv = normalize(&adv);
        let tgt: Vec<f64> = ret.iter().map(|&x| self.norms.alloc.normalize(x)).collect();

        for _ in 0..hp.epochs {
            for mb in self.minibatches(n) {
                let inp = input.select(&mb);
                let mut g = Graph::new();
                let (logp, ent) = self.nets.alloc.evaluate(&mut g, &inp, &pick(&comp, &mb), &pick(&band, &mb));
                let obj = ppo_clip_graph(&mut g, logp, &pick(&old_logp, &mb), &pick(&adv, &mb), hp.clip);
                let bonus = g.scale(ent, hp.entropy_alloc);
                let gain = g.add(obj, bonus);
                let loss = g.scale(gain, -1.0);
                self.nets.alloc.store.zero_grad();
                g.backward(loss, &mut self.nets.alloc.store);
                apply(&mut self.nets.alloc.store, &mut self.opt.alloc, hp.max_grad_norm);

                let mut g = Graph::new();
                let loss = self.nets.alloc_critic.loss(&mut g, &select_rows(&crit, &mb), &pick(&tgt, &mb));
                self.nets.alloc_critic.store.zero_grad();
                g.backward(loss, &mut self.nets.alloc_critic.store);
                apply(&mut self.nets.alloc_critic.store, &mut self.opt.alloc_critic, hp.max_grad_norm);
            }
        }
    }

    /// Greedy-mode evaluation over `episodes` held-out episodes.
    pub fn evaluate(&self, episodes: usize, seed: u64) -> Result<EvalReport, MarlError> {
        Ok(self.evaluate_traced(episodes, seed)?.0)
    }

    /// Like [`Trainer::evaluate`], also returning every slot outcome per
    /// episode.
    pub fn evaluate_traced(&self, episodes: usize, seed: u64) -> Result<(EvalReport, Vec<Vec<SlotOutcome>>), MarlError> {
        let seeds: Vec<u64> = (0..episodes).map(|e| derive_seed(seed, &[TAG_EVAL, e as u64])).collect();
        let eps = self.collect(&seeds, Mode::Eval, self.execution)?;
        let stats: Vec<&EpisodeStats> = eps.iter().map(|e| &e.stats).collect();
        let (delay, energy, privacy, hit_rate, success_rate, slots) = pool(&stats);
        let w = &self.base_env.config().weights;
        let per_user_cost: Vec<f64> = privacy.iter().zip(&energy).map(|(p, e)| w.mu1 * p + w.mu2 * e).collect();
        let reward: f64 = stats.iter().map(|s| s.user_reward).sum();
        let report = EvalReport {
            episodes,
            mean_delay: mean(&delay),
            mean_energy: mean(&energy),
            mean_privacy: mean(&privacy),
            mean_cost: mean(&per_user_cost),
            hit_rate,
            success_rate,
            mean_user_reward: reward / (slots.max(1) * self.dims.users) as f64,
            per_user_cost,
            per_user_delay: delay,
        };
        Ok((report, eps.into_iter().map(|e| e.outcomes).collect()))
    }

    /// Parameters, optimizer state, value normalizers, the multiplier and
    /// the update RNG.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::default();
        for (prefix, store) in self.nets.stores() {
            c.add_store(prefix, store);
        }
        c.rng_states.insert("update".into(), self.rng.clone());
        let extra = |v: serde_json::Result<serde_json::Value>| v.expect("serializable state");
        c.extra.insert("lagrange".into(), extra(serde_json::to_value(&self.lagrange)));
        c.extra.insert("value_norms".into(), extra(serde_json::to_value(&self.norms)));
        c.extra.insert("optimizers".into(), extra(serde_json::to_value(&self.opt)));
        c.extra.insert("iteration".into(), serde_json::Value::from(self.iteration));
        c.extra.insert("dims".into(), extra(serde_json::to_value(self.dims)));
        c
    }

    pub fn restore(&mut self, c: &Checkpoint) -> Result<(), MarlError> {
        let dims: Dims = c
            .extra
            .get("dims")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| MarlError::Incompatible("missing network dimensions".into()))?;
        if dims != self.dims {
            return Err(MarlError::Incompatible(format!("checkpoint dims {dims:?} vs trainer {:?}", self.dims)));
        }
        for (prefix, store) in self.nets.stores_mut() {
            c.load_store(prefix, store)?;
        }
        let get = |k: &str| {
            c.extra
                .get(k)
                .cloned()
                .ok_or_else(|| MarlError::Incompatible(format!("missing {k}")))
        };
        let bad = |e: serde_json::Error| MarlError::Incompatible(e.to_string());
        self.lagrange = serde_json::from_value(get("lagrange")?).map_err(bad)?;
        self.norms = serde_json::from_value(get("value_norms")?).map_err(bad)?;
        self.opt = serde_json::from_value(get("optimizers")?).map_err(bad)?;
        self.iteration = serde_json::from_value(get("iteration")?).map_err(bad)?;
        if let Some(r) = c.rng_states.get("update") {
            self.rng = r.clone();
        }
        Ok(())
    }
}
