//! Deployment-layer policy: a recurrent decoder that picks models one at a
//! time until nothing else fits.

use edgecollab_neural::{GruCell, Graph, Linear, MaskedCategorical, Mlp, ParamStore, Tensor2, Var};
use rand::Rng;

use crate::dims::Dims;

/// A sampled deployment decision for one server.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployMacro {
    pub models: Vec<usize>,
    /// Sum of the step log-probabilities.
    pub log_prob: f64,
    pub entropy: f64,
}

/// Observation with the selection block (the last `I` entries) set to the
/// models chosen so far.
pub fn augment(obs: &[f64], models: usize, chosen: &[usize]) -> Vec<f64> {
    let mut v = obs.to_vec();
    let base = v.len() - models;
    v[base..].iter_mut().for_each(|x| *x = 0.0);
    for &i in chosen {
        v[base + i] = 1.0;
    }
    v
}

/// Models that are not yet chosen and fit in what is left of `capacity`.
pub fn feasible(chosen: &[usize], capacity: u64, sizes: &[u64]) -> Vec<bool> {
    let used: u64 = chosen.iter().map(|&i| sizes[i]).sum();
    let left = capacity.saturating_sub(used);
    (0..sizes.len()).map(|i| !chosen.contains(&i) && sizes[i] <= left).collect()
}

/// Mean of the step values; an empty macro-action uses the pre-step value.
pub fn macro_value(step_values: &[f64], pre_step: f64) -> f64 {
    if step_values.is_empty() {
        pre_step
    } else {
        step_values.iter().sum::<f64>() / step_values.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct DeployPolicy {
    pub store: ParamStore,
    dims: Dims,
    encoder: Mlp,
    gru: GruCell,
    head: Linear,
}

impl DeployPolicy {
    pub fn new<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let obs = 3 * dims.models;
        let encoder = Mlp::new(&mut store, "encoder", &[obs, dims.hidden], 2f64.sqrt(), rng);
        let gru = GruCell::new(&mut store, "gru", obs, dims.hidden, rng);
        let head = Linear::new(&mut store, "head", dims.hidden, dims.models, 0.01, rng);
        Self {
            store,
            dims,
            encoder,
            gru,
            head,
        }
    }

    /// Draws a macro-action for one server from its local observation.
    pub fn sample_deploy_macro<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        capacity: u64,
        sizes: &[u64],
        rng: &mut R,
        greedy: bool,
    ) -> DeployMacro {
        let i_n = self.dims.models;
        let s = &self.store;
        let mut g = Graph::new();
        let x0 = g.input(Tensor2::row_vector(obs.to_vec()));
        let mut h = self.encoder.forward_tanh(&mut g, s, x0);
        let mut out = DeployMacro {
            models: Vec::new(),
            log_prob: 0.0,
            entropy: 0.0,
        };
        loop {
            let mask = feasible(&out.models, capacity, sizes);
            if !mask.contains(&true) {
                return out;
            }
            let x = g.input(Tensor2::row_vector(augment(obs, i_n, &out.models)));
            h = self.gru.step(&mut g, s, x, h);
            let logits = self.head.forward(&mut g, s, h);
            let d = MaskedCategorical::new(g.value(logits).row(0), &mask).expect("mask has an entry");
            let pick = if greedy { d.mode() } else { d.sample(rng).0 };
            out.log_prob += d.log_prob(pick);
            out.entropy += d.entropy();
            out.models.push(pick);
        }
    }

    /// Differentiable sequence log-probabilities and summed step entropies
    /// (`B x 1` each) of recorded macro-actions.
    pub fn evaluate(
        &self,
        g: &mut Graph,
        obs: &[Vec<f64>],
        capacity: &[u64],
        sizes: &[u64],
        macros: &[Vec<usize>],
    ) -> (Var, Var) {
        let b = obs.len();
        let i_n = self.dims.models;
        let s = &self.store;
        let steps = macros.iter().map(Vec::len).max().unwrap_or(0);
        if steps == 0 {
            let z = g.input(Tensor2::zeros(b, 1));
            return (z, z);
        }
        let width = obs[0].len();
        let x0 = g.input(Tensor2::from_vec(b, width, obs.concat()));
        let mut h = self.encoder.forward_tanh(g, s, x0);
        let mut logp: Option<Var> = None;
        let mut ent: Option<Var> = None;
        for t in 0..steps {
            let mut x = Vec::with_capacity(b * width);
            let mut mask = Vec::with_capacity(b * i_n);
            let mut index = Vec::with_capacity(b);
            for r in 0..b {
                let m = &macros[r];
                let prefix = &m[..t.min(m.len())];
                x.extend(augment(&obs[r], i_n, prefix));
                if t < m.len() {
                    mask.extend(feasible(prefix, capacity[r], sizes));
                    index.push(m[t]);
                } else {
                    mask.extend(std::iter::repeat_n(false, i_n));
                    index.push(0);
                }
            }
            let xv = g.input(Tensor2::from_vec(b, width, x));
            h = self.gru.step(g, s, xv, h);
            let logits = self.head.forward(g, s, h);
            let lp = g.masked_log_prob_at(logits, &mask, &index);
            let e = g.masked_entropy(logits, &mask);
            logp = Some(match logp {
                Some(acc) => g.add(acc, lp),
                None => lp,
            });
            ent = Some(match ent {
                Some(acc) => g.add(acc, e),
                None => e,
            });
        }
        (logp.expect("at least one step"), ent.expect("at least one step"))
    }
}
