//! Observation rows fed to the policies and critics.

use edgecollab_core::{EdgeEnv, UserAction};
use edgecollab_neural::Tensor2;

use crate::alloc::AllocInput;
use crate::user::UserInput;

fn one_hot(n: usize, i: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if k == i { 1.0 } else { 0.0 })
}

/// Local user observations with the agent one-hot appended.
pub fn user_input(env: &EdgeEnv) -> UserInput {
    let k_n = env.config().num_users;
    let x = env.deployment().as_features();
    let cols = x.len() + k_n;
    let mut rest = Vec::with_capacity(k_n * cols);
    for k in 0..k_n {
        rest.extend_from_slice(&x);
        rest.extend(one_hot(k_n, k));
    }
    let req = env.requests();
    UserInput {
        models: req.iter().map(|r| r.model).collect(),
        batches: req.iter().map(|r| env.normalized_batch(r.batch)).collect(),
        rest: Tensor2::from_vec(k_n, cols, rest),
        layers: req.iter().map(|r| env.catalog()[r.model].layer_count()).collect(),
    }
}

/// Critic rows for the user agents: the global observation (or, for local
/// critics, the agent's own request and `vec(X)`) plus the agent one-hot.
pub fn user_critic_rows(env: &EdgeEnv, centralized: bool) -> Vec<f64> {
    let k_n = env.config().num_users;
    let mut out = Vec::new();
    if centralized {
        let global = env.user_global_observation();
        for k in 0..k_n {
            out.extend_from_slice(&global);
            out.extend(one_hot(k_n, k));
        }
    } else {
        let x = env.deployment().as_features();
        for (k, r) in env.requests().iter().enumerate() {
            out.push(env.normalized_model(r.model));
            out.push(env.normalized_batch(r.batch));
            out.extend_from_slice(&x);
            out.extend(one_hot(k_n, k));
        }
    }
    out
}

pub fn user_critic_width(users: usize, models: usize, servers: usize, centralized: bool) -> usize {
    let base = if centralized { 2 * users } else { 2 };
    base + models * servers + users
}

/// Allocation inputs for every server given the user actions.
pub fn alloc_input(env: &EdgeEnv, actions: &[UserAction]) -> AllocInput {
    let j_n = env.config().num_servers;
    let obs = env.alloc_observations(actions);
    let cols = obs[0].len();
    let req = env.requests();
    let mut out = AllocInput {
        obs: Tensor2::from_vec(j_n, cols, obs.concat()),
        models: Vec::new(),
        batches: Vec::new(),
        splits: Vec::new(),
        active: Vec::new(),
    };
    for j in 0..j_n {
        for (k, a) in actions.iter().enumerate() {
            out.models.push(req[k].model);
            out.batches.push(env.normalized_batch(req[k].batch));
            out.splits.push(env.normalized_split(a.split));
            out.active.push(a.server == j);
        }
    }
    out
}

/// Allocation critic rows: the server's observation plus its one-hot.
pub fn alloc_critic_rows(input: &AllocInput, servers: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..input.len() {
        out.extend_from_slice(input.obs.row(j));
        out.extend(one_hot(servers, j % servers));
    }
    out
}

/// Deployment critic row: the (global or local) observation with the
/// selection block filled, plus the server one-hot.
pub fn deploy_critic_row(obs: &[f64], models: usize, chosen: &[usize], server: usize, servers: usize) -> Vec<f64> {
    // The selection block sits right after the two count blocks.
    let mut v = obs.to_vec();
    let base = 2 * models;
    v[base..base + models].iter_mut().for_each(|x| *x = 0.0);
    for &i in chosen {
        v[base + i] = 1.0;
    }
    v.extend(one_hot(servers, server));
    v
}
