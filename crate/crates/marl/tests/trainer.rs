//! Trainer contracts: buffer sizes, the decoupled dual, ablation wiring,
//! checkpoints and determinism.

use std::sync::Arc;

use edgecollab_core::{Algorithm, BaselineSpec, SystemConfig};
use edgecollab_marl::{Execution, Mode, TrainConfig, Trainer};

fn small_hp() -> TrainConfig {
    TrainConfig {
        hidden: 16,
        num_envs: 2,
        epochs: 1,
        ..TrainConfig::default()
    }
}

fn trainer(cfg: &SystemConfig, spec: BaselineSpec, hp: TrainConfig, seed: u64) -> Trainer {
    let catalog = Arc::new(cfg.build_catalog().unwrap());
    Trainer::new(cfg, catalog, spec, hp, seed).unwrap()
}

fn short_desk() -> SystemConfig {
    SystemConfig {
        episode_slots: 20,
        ..SystemConfig::desk()
    }
}

#[test]
fn buffer_sizes_match_counting() {
    let cfg = SystemConfig {
        episode_slots: 200,
        ..SystemConfig::desk()
    };
    let hp = TrainConfig {
        num_envs: 4,
        hidden: 16,
        ..TrainConfig::default()
    };
    let t = trainer(&cfg, Algorithm::HcMappoL.spec(), hp, 0);
    let eps = t.collect(&t.train_seeds(0), Mode::Train, Execution::Sequential).unwrap();
    let (j, k, dt) = (cfg.num_servers, cfg.num_users, cfg.deploy_interval);
    let users: usize = eps.iter().map(|e| e.users.len() * e.users[0].actions.len()).sum();
    let allocs: usize = eps.iter().map(|e| e.allocs.iter().map(|s| s.log_probs.len()).sum::<usize>()).sum();
    let deploys: usize = eps.iter().map(|e| e.deploys.iter().map(|d| d.macros.len()).sum::<usize>()).sum();
    assert_eq!(users, 4 * 200 * k);
    assert_eq!(users, 6400);
    assert_eq!(allocs, 4 * 200 * j);
    assert_eq!(deploys, 4 * (200 / dt) * j);
    for e in &eps {
        assert!(e.users.iter().all(|s| s.rewards.len() == k && s.costs.len() == k));
    }
}

#[test]
fn zero_learning_rate_freezes_parameters_but_not_lambda() {
    let hp = TrainConfig { lr: 0.0, ..small_hp() };
    let mut t = trainer(&short_desk(), Algorithm::HcMappoL.spec(), hp, 1);
    let before = t.checkpoint().params;
    let lam0 = t.lagrange.lambda;
    let m = t.train_iteration().unwrap();
    assert_eq!(t.checkpoint().params, before);
    assert_eq!(m.lambda_before, lam0);
    assert!((m.lambda - (lam0 + 0.01 * (m.mean_delay - 3.0)).clamp(0.0, 100.0)).abs() < 1e-15);
    assert_ne!(m.lambda, lam0);
}

#[test]
fn slack_constraint_never_raises_lambda() {
    let mut cfg = short_desk();
    cfg.weights.tau_bar = 1000.0;
    let hp = TrainConfig {
        lambda_init: 0.5,
        lambda_lr: 1e-4,
        ..small_hp()
    };
    let mut t = trainer(&cfg, Algorithm::HcMappoL.spec(), hp, 2);
    let mut prev = t.lagrange.lambda;
    for _ in 0..3 {
        let m = t.train_iteration().unwrap();
        assert!(m.mean_delay < 1000.0);
        assert!(m.lambda <= prev);
        prev = m.lambda;
    }
}

#[test]
fn zero_multiplier_reduces_to_unconstrained_update() {
    let mut cfg = short_desk();
    cfg.weights.mu3 = 0.0;
    let hp = TrainConfig {
        lambda_init: 0.0,
        lambda_lr: 0.0,
        ..small_hp()
    };
    let mut constrained = trainer(&cfg, Algorithm::HcMappoL.spec(), hp.clone(), 4);
    let mut plain = trainer(&short_desk(), Algorithm::HMappo.spec(), hp, 4);
    for _ in 0..2 {
        let a = constrained.train_iteration().unwrap();
        let b = plain.train_iteration().unwrap();
        assert_eq!(a.user_reward, b.user_reward);
        assert_eq!(a.mean_delay, b.mean_delay);
    }
    assert_eq!(constrained.nets().user.store.named_values().collect::<Vec<_>>(), plain.nets().user.store.named_values().collect::<Vec<_>>());
    assert_eq!(plain.lagrange.lambda, 0.0);
}

#[test]
fn ablation_wiring() {
    let cfg = short_desk();
    let h = trainer(&cfg, Algorithm::HMappo.spec(), small_hp(), 0);
    assert_eq!(h.base_env().config().weights.mu3, 0.0);
    assert!(h.lagrange.frozen);
    let hc = trainer(&cfg, Algorithm::HcMappoL.spec(), small_hp(), 0);
    assert_eq!(hc.base_env().config().weights.mu3, cfg.weights.mu3);
    let ippo = trainer(&cfg, Algorithm::HIppo.spec(), small_hp(), 0);
    assert!(ippo.nets().user_critic.inputs() < hc.nets().user_critic.inputs());
    assert!(ippo.nets().deploy_critic.inputs() < hc.nets().deploy_critic.inputs());
    // The heuristic user-layer ablation only trains the user policy.
    let mut heur = trainer(&cfg, Algorithm::HeuristicMappoL.spec(), small_hp(), 0);
    let alloc_before = heur.nets().alloc.store.named_values().map(|(n, v)| (n.to_string(), v.clone())).collect::<Vec<_>>();
    let user_before = heur.nets().user.store.named_values().map(|(n, v)| (n.to_string(), v.clone())).collect::<Vec<_>>();
    heur.train_iteration().unwrap();
    let alloc_after = heur.nets().alloc.store.named_values().map(|(n, v)| (n.to_string(), v.clone())).collect::<Vec<_>>();
    let user_after = heur.nets().user.store.named_values().map(|(n, v)| (n.to_string(), v.clone())).collect::<Vec<_>>();
    assert_eq!(alloc_before, alloc_after);
    assert_ne!(user_before, user_after);
}

#[test]
fn checkpoint_round_trip_reproduces_training() {
    let cfg = short_desk();
    let mut a = trainer(&cfg, Algorithm::HcMappoL.spec(), small_hp(), 6);
    a.train_iteration().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    a.checkpoint().save(&path).unwrap();
    let mut b = trainer(&cfg, Algorithm::HcMappoL.spec(), small_hp(), 6);
    b.restore(&edgecollab_neural::Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(a.evaluate(1, 3).unwrap(), b.evaluate(1, 3).unwrap());
    assert_eq!(a.train_iteration().unwrap(), b.train_iteration().unwrap());
    let mut other = trainer(&SystemConfig { num_users: 5, ..cfg }, Algorithm::HcMappoL.spec(), small_hp(), 6);
    assert!(other.restore(&a.checkpoint()).is_err());
}

#[test]
fn execution_modes_and_reruns_agree() {
    let cfg = short_desk();
    let mut a = trainer(&cfg, Algorithm::HcMappoL.spec(), small_hp(), 8);
    let mut b = trainer(&cfg, Algorithm::HcMappoL.spec(), small_hp(), 8);
    a.execution = Execution::Parallel;
    b.execution = Execution::Sequential;
    for _ in 0..2 {
        assert_eq!(a.train_iteration().unwrap(), b.train_iteration().unwrap());
    }
    assert_eq!(a.evaluate(2, 1).unwrap(), b.evaluate(2, 1).unwrap());
}

#[test]
fn heuristic_evaluation_needs_no_training() {
    let cfg = short_desk();
    let t = trainer(&cfg, Algorithm::EdgeOnly.spec(), small_hp(), 0);
    let r = t.evaluate(2, 0).unwrap();
    assert_eq!(r.hit_rate, 1.0);
    assert!(r.mean_delay > 0.0 && (0.0..=1.0).contains(&r.success_rate));
    assert_eq!(r.per_user_cost.len(), cfg.num_users);
}
