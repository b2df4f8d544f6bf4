//! Sampling contracts of the three policies.

use std::sync::Arc;

use edgecollab_core::{EdgeEnv, SystemConfig, UserAction};
use edgecollab_marl::features::{alloc_input, user_input};
use edgecollab_marl::{AllocPolicy, DeployPolicy, Dims, UserPolicy};
use edgecollab_neural::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GB: u64 = 1 << 30;

#[test]
fn three_two_gb_models_in_three_gb_never_pair() {
    let dims = Dims::new(3, 1, 1, 1).with_hidden(16);
    let p = DeployPolicy::new(dims, &mut ChaCha8Rng::seed_from_u64(0));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = [0usize; 3];
    for n in 0..10_000 {
        let obs: Vec<f64> = (0..9).map(|c| ((n * 9 + c) as f64 * 0.013).sin()).collect();
        let m = p.sample_deploy_macro(&obs, 3 * GB, &[2 * GB; 3], &mut rng, false);
        assert_eq!(m.models.len(), 1);
        seen[m.models[0]] += 1;
    }
    assert!(seen.iter().all(|&c| c > 0));
}

#[test]
fn sampled_macros_respect_storage_and_never_repeat() {
    let cfg = Arc::new(SystemConfig::desk());
    let catalog = Arc::new(cfg.build_catalog().unwrap());
    let env = EdgeEnv::new(cfg, catalog, 3).unwrap();
    let dims = Dims::of(&env).with_hidden(16);
    let p = DeployPolicy::new(dims, &mut ChaCha8Rng::seed_from_u64(2));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Random sizes and capacities make storage bind often.
    for _ in 0..10_000 {
        let sizes: Vec<u64> = (0..dims.models).map(|_| rng.random_range(1..100)).collect();
        let cap = rng.random_range(0..300);
        let obs: Vec<f64> = (0..3 * dims.models).map(|_| rng.random_range(0.0..1.0)).collect();
        let m = p.sample_deploy_macro(&obs, cap, &sizes, &mut rng, false);
        let used: u64 = m.models.iter().map(|&i| sizes[i]).sum();
        assert!(used <= cap);
        let mut sorted = m.models.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), m.models.len());
        // Maximal: nothing else fits.
        assert!((0..dims.models).all(|i| m.models.contains(&i) || sizes[i] > cap - used));
    }
}

#[test]
fn joint_user_log_prob_is_the_recomputed_density() {
    let cfg = Arc::new(SystemConfig::desk());
    let catalog = Arc::new(cfg.build_catalog().unwrap());
    let mut env = EdgeEnv::new(cfg, catalog, 5).unwrap();
    let dims = Dims::of(&env).with_hidden(16);
    let p = UserPolicy::new(dims, &mut ChaCha8Rng::seed_from_u64(4));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for ep in 0..20 {
        env.new_episode(ep);
        let input = user_input(&env);
        let samples = p.act(&input, &mut rng, false);
        let actions: Vec<UserAction> = samples.iter().map(|s| s.action).collect();
        let mut g = Graph::new();
        let (lp, ent) = p.evaluate(&mut g, &input, &actions);
        for (r, s) in samples.iter().enumerate() {
            assert!((g.value(lp).get(r, 0) - s.log_prob).abs() < 1e-12);
            assert!((g.value(ent).get(r, 0) - s.entropy).abs() < 1e-12);
            assert!(s.log_prob <= 0.0 && s.log_prob.exp() <= 1.0);
            assert!(s.action.split <= input.layers[r]);
        }
    }
}

#[test]
fn allocation_weights_are_simplices() {
    let cfg = Arc::new(SystemConfig::desk());
    let catalog = Arc::new(cfg.build_catalog().unwrap());
    let mut env = EdgeEnv::new(cfg, catalog, 9).unwrap();
    let dims = Dims::of(&env).with_hidden(16);
    let p = AllocPolicy::new(dims, -1.0, &mut ChaCha8Rng::seed_from_u64(7));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut draws = 0;
    let mut seed = 0;
    while draws < 1000 {
        env.new_episode(seed);
        seed += 1;
        let actions: Vec<UserAction> = (0..dims.users)
            .map(|k| UserAction {
                server: rng.random_range(0..dims.servers),
                split: rng.random_range(0..=env.catalog()[env.requests()[k].model].layer_count()),
            })
            .collect();
        let input = alloc_input(&env, &actions);
        for (j, s) in p.act(&input, &mut rng, seed % 2 == 0).iter().enumerate() {
            let active: Vec<bool> = actions.iter().map(|a| a.server == j).collect();
            if !active.contains(&true) {
                continue;
            }
            for w in [&s.action.comp, &s.action.band] {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (x, &a) in w.iter().zip(&active) {
                    assert!(*x >= 0.0);
                    if !a {
                        assert_eq!(*x, 0.0);
                    }
                }
            }
            draws += 1;
        }
    }
}
