//! Central finite-difference checks of every differentiable operator and
//! of composed layers.

use edgecollab_neural::gradcheck::{check_case, operator_cases, random, random_mask, ABS_FLOOR, STEP};
use edgecollab_neural::{Embedding, Graph, GruCell, Linear, Mlp, ParamStore, ScalarEncoder, Tensor2, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHAPES: usize = 50;

#[test]
fn every_operator_matches_central_differences() {
    let cases = operator_cases();
    assert_eq!(cases.len(), 23);
    for (seed, (name, case)) in cases.into_iter().enumerate() {
        let worst = check_case(case, SHAPES, seed as u64 + 1);
        assert!(worst < 1e-4, "{name}: relative error {worst}");
    }
}

fn loss_of(g: &mut Graph, out: Var, weights: &Tensor2) -> Var {
    let w = g.input(weights.clone());
    let p = g.mul(out, w);
    let s = g.sum_cols(p);
    g.mean_all(s)
}

/// Full-layer checks through the layer APIs: parameters live in a store and
/// are perturbed there.
fn layer_check(seed: u64, make: impl Fn(&mut ParamStore, &mut ChaCha8Rng) -> Box<dyn Fn(&mut Graph, &ParamStore) -> Var>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for shape in 0..SHAPES {
        let mut store = ParamStore::new();
        let f = make(&mut store, &mut rng);
        for id in store.ids().collect::<Vec<_>>() {
            let noise = random(&mut rng, store.value(id).rows(), store.value(id).cols(), 0.3);
            store.value_mut(id).add_assign(&noise);
        }
        let mut g = Graph::new();
        let out = f(&mut g, &store);
        let (r, c) = g.value(out).shape();
        let weights = random(&mut rng, r, c, 1.0);
        let l = loss_of(&mut g, out, &weights);
        g.backward(l, &mut store);
        let value = |s: &ParamStore| {
            let mut g = Graph::new();
            let out = f(&mut g, s);
            let l = loss_of(&mut g, out, &weights);
            g.value(l).item()
        };
        for id in store.ids().collect::<Vec<_>>() {
            for e in 0..store.value(id).data().len() {
                let mut s = store.clone();
                s.value_mut(id).data_mut()[e] += STEP;
                let up = value(&s);
                s.value_mut(id).data_mut()[e] -= 2.0 * STEP;
                let down = value(&s);
                let numeric = (up - down) / (2.0 * STEP);
                let analytic = store.grad(id).data()[e];
                let err = (analytic - numeric).abs();
                assert!(
                    err <= ABS_FLOOR || err / analytic.abs().max(numeric.abs()) < 1e-4,
                    "seed {seed} shape {shape} {}[{e}]: {analytic} vs {numeric}",
                    store.name(id)
                );
            }
        }
    }
}

#[test]
fn mlp_softmax_log_prob_composite() {
    layer_check(30, |store, rng| {
        let (b, i) = (rng.random_range(1..4), rng.random_range(1..5));
        let o = rng.random_range(2..5);
        let mlp = Mlp::new(store, "m", &[i, rng.random_range(1..6), o], 1.0, rng);
        let x = random(rng, b, i, 1.0);
        let mask = random_mask(rng, b, o);
        let index: Vec<usize> = (0..b).map(|r| (0..o).find(|&k| mask[r * o + k]).unwrap()).collect();
        Box::new(move |g, s| {
            let xi = g.input(x.clone());
            let logits = mlp.forward(g, s, xi);
            g.masked_log_prob_at(logits, &mask, &index)
        })
    });
}

#[test]
fn gru_step_two_steps() {
    layer_check(31, |store, rng| {
        let (b, i) = (rng.random_range(1..4), rng.random_range(1..4));
        let h = rng.random_range(1..4);
        let gru = GruCell::new(store, "g", i, h, rng);
        let (x0, x1, h0) = (random(rng, b, i, 1.0), random(rng, b, i, 1.0), random(rng, b, h, 0.9));
        Box::new(move |g, s| {
            let (a, c, hv) = (g.input(x0.clone()), g.input(x1.clone()), g.input(h0.clone()));
            let h1 = gru.step(g, s, a, hv);
            gru.step(g, s, c, h1)
        })
    });
}

#[test]
fn embedding_encoder_linear() {
    layer_check(32, |store, rng| {
        let n = rng.random_range(1..5);
        let w = rng.random_range(1..4);
        let emb = Embedding::new(store, "e", n, w, rng);
        let enc = ScalarEncoder::new(store, "s", w, rng);
        let lin = Linear::new(store, "l", 2 * w, 2, 1.0, rng);
        let ids: Vec<usize> = (0..3).map(|_| rng.random_range(0..n)).collect();
        let vals: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        Box::new(move |g, s| {
            let a = emb.forward(g, s, &ids);
            let b = enc.forward(g, s, &vals);
            let cat = g.concat_cols(&[a, b]);
            lin.forward(g, s, cat)
        })
    });
}
