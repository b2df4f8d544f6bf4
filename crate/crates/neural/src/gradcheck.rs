//! Central finite-difference checks of the graph operators.
//!
//! Each case draws random parameters and builds one operator on them. The
//! scalar loss is the mean over rows of the output weighted by fixed random
//! weights, so every output entry contributes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::tensor::Tensor2;

pub const STEP: f64 = 1e-6;

/// Absolute errors at or below this count as exact.
pub const ABS_FLOOR: f64 = 1e-6;

pub type Build = Box<dyn Fn(&mut Graph, &[Var]) -> Var>;

/// One random instance: parameter values plus the operator applied to them.
pub type Case = fn(&mut ChaCha8Rng) -> (Vec<Tensor2>, Build);

pub fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor2 {
    Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect())
}

/// Random mask with at least one allowed entry per row.
pub fn random_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<bool> {
    let mut m: Vec<bool> = (0..rows * cols).map(|_| rng.random_bool(0.7)).collect();
    for r in 0..rows {
        let c = rng.random_range(0..cols);
        m[r * cols + c] = true;
    }
    m
}

fn loss_of(g: &mut Graph, out: Var, weights: &Tensor2) -> Var {
    let w = g.input(weights.clone());
    let p = g.mul(out, w);
    let s = g.sum_cols(p);
    g.mean_all(s)
}

fn eval(params: &[Tensor2], build: &Build, weights: &Tensor2) -> f64 {
    let mut store = ParamStore::new();
    let ids: Vec<_> = params.iter().enumerate().map(|(i, t)| store.add(format!("p{i}"), t.clone())).collect();
    let mut g = Graph::new();
    let vars: Vec<Var> = ids.iter().map(|&id| g.param(&store, id)).collect();
    let out = build(&mut g, &vars);
    let l = loss_of(&mut g, out, weights);
    g.value(l).item()
}

/// Worst relative error between backward and central differences over all
/// parameter entries; entries within [`ABS_FLOOR`] count as zero error.
pub fn max_relative_error(params: Vec<Tensor2>, build: Build, rng: &mut ChaCha8Rng) -> f64 {
    let mut store = ParamStore::new();
    let ids: Vec<_> = params.iter().enumerate().map(|(i, t)| store.add(format!("p{i}"), t.clone())).collect();
    let mut g = Graph::new();
    let vars: Vec<Var> = ids.iter().map(|&id| g.param(&store, id)).collect();
    let out = build(&mut g, &vars);
    let (r, c) = g.value(out).shape();
    let weights = random(rng, r, c, 1.0);
    let l = loss_of(&mut g, out, &weights);
    g.backward(l, &mut store);

    let mut worst: f64 = 0.0;
    for (pi, id) in ids.iter().enumerate() {
        for e in 0..params[pi].data().len() {
            let mut plus = params.clone();
            plus[pi].data_mut()[e] += STEP;
            let mut minus = params.clone();
            minus[pi].data_mut()[e] -= STEP;
            let numeric = (eval(&plus, &build, &weights) - eval(&minus, &build, &weights)) / (2.0 * STEP);
            let analytic = store.grad(*id).data()[e];
            let err = (analytic - numeric).abs();
            let rel = if err <= ABS_FLOOR { 0.0 } else { err / analytic.abs().max(numeric.abs()) };
            worst = worst.max(rel);
        }
    }
    worst
}

/// Worst relative error over `shapes` random instances of `case`.
pub fn check_case(case: Case, shapes: usize, seed: u64) -> f64 {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    (0..shapes)
        .map(|_| {
            let (params, build) = case(&mut rng);
            max_relative_error(params, build, &mut rng)
        })
        .fold(0.0, f64::max)
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..6))
}

fn unary(rng: &mut ChaCha8Rng, scale: f64, op: fn(&mut Graph, Var) -> Var) -> (Vec<Tensor2>, Build) {
    let (r, c) = dims(rng);
    (vec![random(rng, r, c, scale)], Box::new(move |g, v| op(g, v[0])))
}

fn binary(rng: &mut ChaCha8Rng, op: fn(&mut Graph, Var, Var) -> Var) -> (Vec<Tensor2>, Build) {
    let (r, c) = dims(rng);
    (vec![random(rng, r, c, 1.0), random(rng, r, c, 1.0)], Box::new(move |g, v| op(g, v[0], v[1])))
}

/// Every differentiable operator of [`Graph`] with its random-instance
/// generator. Piecewise operators keep inputs away from their kinks.
pub fn operator_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("matmul", |rng| {
            let (r, c) = dims(rng);
            let k = rng.random_range(1..5);
            (vec![random(rng, r, k, 1.0), random(rng, k, c, 1.0)], Box::new(|g, v| g.matmul(v[0], v[1])))
        }),
        ("add_bias", |rng| {
            let (r, c) = dims(rng);
            (vec![random(rng, r, c, 1.0), random(rng, 1, c, 1.0)], Box::new(|g, v| g.add_bias(v[0], v[1])))
        }),
        ("add", |rng| binary(rng, Graph::add)),
        ("sub", |rng| binary(rng, Graph::sub)),
        ("mul", |rng| binary(rng, Graph::mul)),
        ("scale", |rng| {
            let (r, c) = dims(rng);
            let k = rng.random_range(-3.0..3.0);
            (vec![random(rng, r, c, 1.0)], Box::new(move |g, v| g.scale(v[0], k)))
        }),
        ("add_scalar", |rng| unary(rng, 1.0, |g, v| g.add_scalar(v, 0.7))),
        ("one_minus", |rng| unary(rng, 1.0, Graph::one_minus)),
        ("tanh", |rng| unary(rng, 2.0, Graph::tanh)),
        ("sigmoid", |rng| unary(rng, 3.0, Graph::sigmoid)),
        ("exp", |rng| unary(rng, 2.0, Graph::exp)),
        ("square", |rng| unary(rng, 2.0, Graph::square)),
        ("concat_cols", |rng| {
            let r = rng.random_range(1..5);
            let ps: Vec<_> = (0..3)
                .map(|_| {
                    let c = rng.random_range(1..4);
                    random(rng, r, c, 1.0)
                })
                .collect();
            (ps, Box::new(|g, v| g.concat_cols(v)))
        }),
        ("embedding", |rng| {
            let (n, c) = dims(rng);
            let ids: Vec<usize> = (0..rng.random_range(1..7)).map(|_| rng.random_range(0..n)).collect();
            (vec![random(rng, n, c, 1.0)], Box::new(move |g, v| g.embedding(v[0], &ids)))
        }),
        ("sum_cols", |rng| unary(rng, 1.0, Graph::sum_cols)),
        ("mean_all", |rng| unary(rng, 1.0, Graph::mean_all)),
        ("grouped_row_dot", |rng| {
            let (b, d) = dims(rng);
            let group = rng.random_range(1..5);
            (
                vec![random(rng, b, d, 1.0), random(rng, b * group, d, 1.0)],
                Box::new(move |g, v| g.grouped_row_dot(v[0], v[1], group)),
            )
        }),
        ("masked_log_prob_at", |rng| {
            let (r, c) = dims(rng);
            let mask = random_mask(rng, r, c);
            let index: Vec<usize> = (0..r)
                .map(|row| {
                    let allowed: Vec<usize> = (0..c).filter(|&k| mask[row * c + k]).collect();
                    allowed[rng.random_range(0..allowed.len())]
                })
                .collect();
            (vec![random(rng, r, c, 2.0)], Box::new(move |g, v| g.masked_log_prob_at(v[0], &mask, &index)))
        }),
        ("masked_entropy", |rng| {
            let (r, c) = dims(rng);
            let mask = random_mask(rng, r, c);
            (vec![random(rng, r, c, 2.0)], Box::new(move |g, v| g.masked_entropy(v[0], &mask)))
        }),
        ("masked_softmax", |rng| {
            let (r, c) = dims(rng);
            let mask = random_mask(rng, r, c);
            (vec![random(rng, r, c, 2.0)], Box::new(move |g, v| g.masked_softmax(v[0], &mask)))
        }),
        ("gaussian_log_prob", |rng| {
            let (r, c) = dims(rng);
            let mask = random_mask(rng, r, c);
            let x = random(rng, r, c, 1.5);
            (
                vec![random(rng, r, c, 1.0), random(rng, 1, 1, 0.5)],
                Box::new(move |g, v| g.gaussian_log_prob(v[0], v[1], x.clone(), &mask)),
            )
        }),
        ("min", |rng| {
            let (r, c) = dims(rng);
            let a = random(rng, r, c, 1.0);
            let gap = random(rng, r, c, 0.5).map(|d| if d.abs() < 1e-2 { 0.1 } else { d });
            let mut b = a.clone();
            b.add_assign(&gap);
            (vec![a, b], Box::new(|g, v| g.min(v[0], v[1])))
        }),
        ("clamp", |rng| {
            let (r, c) = dims(rng);
            let x = random(rng, r, c, 2.0).map(|x| if (x.abs() - 0.8).abs() < 1e-2 { x + 0.05 } else { x });
            (vec![x], Box::new(|g, v| g.clamp(v[0], -0.8, 0.8)))
        }),
    ]
}
