//! Allocation-layer policy: two attention branches (compute, bandwidth)
//! that score a server's associated users against a context query.

use edgecollab_core::AllocAction;
use edgecollab_neural::{Embedding, Graph, Linear, Mlp, ParamId, ParamStore, ScalarEncoder, Tensor2, Var};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dims::Dims;

/// A batch of per-server allocation observations. Per-user arrays are
/// row-major `B x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocInput {
    /// `B x 3K` observation rows.
    pub obs: Tensor2,
    pub models: Vec<usize>,
    pub batches: Vec<f64>,
    pub splits: Vec<f64>,
    pub active: Vec<bool>,
}

impl AllocInput {
    pub fn len(&self) -> usize {
        self.obs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.rows() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let k = self.models.len() / self.len().max(1);
        let pick = |v: &[f64], w: usize| idx.iter().flat_map(|&i| v[i * w..(i + 1) * w].iter().copied()).collect();
        let cols = self.obs.cols();
        Self {
            obs: Tensor2::from_vec(idx.len(), cols, pick(self.obs.data(), cols)),
            models: idx.iter().flat_map(|&i| self.models[i * k..(i + 1) * k].iter().copied()).collect(),
            batches: pick(&self.batches, k),
            splits: pick(&self.splits, k),
            active: idx.iter().flat_map(|&i| self.active[i * k..(i + 1) * k].iter().copied()).collect(),
        }
    }

    pub fn concat(parts: &[AllocInput]) -> Self {
        let cols = parts.first().map_or(0, |p| p.obs.cols());
        let rows: usize = parts.iter().map(|p| p.len()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        let mut out = Self {
            obs: Tensor2::zeros(0, cols),
            models: Vec::new(),
            batches: Vec::new(),
            splits: Vec::new(),
            active: Vec::new(),
        };
        for p in parts {
            data.extend_from_slice(p.obs.data());
            out.models.extend_from_slice(&p.models);
            out.batches.extend_from_slice(&p.batches);
            out.splits.extend_from_slice(&p.splits);
            out.active.extend_from_slice(&p.active);
        }
        out.obs = Tensor2::from_vec(rows, cols, data);
        out
    }
}

/// One server's allocation decision with the perturbed scores it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocSample {
    pub action: AllocAction,
    pub comp_scores: Vec<f64>,
    pub band_scores: Vec<f64>,
    pub log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct AllocPolicy {
    pub store: ParamStore,
    dims: Dims,
    context: Mlp,
    q_comp: Linear,
    q_band: Linear,
    model_emb: Embedding,
    batch_enc: ScalarEncoder,
    split_enc: ScalarEncoder,
    key: Mlp,
    k_comp: Linear,
    k_band: Linear,
    pub log_std: ParamId,
}

impl AllocPolicy {
    pub fn new<R: Rng + ?Sized>(dims: Dims, log_std_init: f64, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let (h, d, e) = (dims.hidden, dims.attn, dims.embed);
        let context = Mlp::new(&mut store, "context", &[3 * dims.users, h], 2f64.sqrt(), rng);
        let q_comp = Linear::new(&mut store, "q_comp", h, d, 1.0, rng);
        let q_band = Linear::new(&mut store, "q_band", h, d, 1.0, rng);
        let model_emb = Embedding::new(&mut store, "model_emb", dims.models, e, rng);
        let batch_enc = ScalarEncoder::new(&mut store, "batch_enc", e, rng);
        let split_enc = ScalarEncoder::new(&mut store, "split_enc", e, rng);
        let key = Mlp::new(&mut store, "key", &[3 * e, h], 2f64.sqrt(), rng);
        let k_comp = Linear::new(&mut store, "k_comp", h, d, 1.0, rng);
        let k_band = Linear::new(&mut store, "k_band", h, d, 1.0, rng);
        let log_std = store.add("log_std", Tensor2::scalar(log_std_init));
        Self {
            store,
            dims,
            context,
            q_comp,
            q_band,
            model_emb,
            batch_enc,
            split_enc,
            key,
            k_comp,
            k_band,
            log_std,
        }
    }

    /// Attention scores `q · κ / sqrt(d_h)` of both branches, `B x K` each.
    pub fn scores(&self, g: &mut Graph, input: &AllocInput) -> (Var, Var) {
        let s = &self.store;
        let k = self.dims.users;
        let obs = g.input(input.obs.clone());
        let ctx = self.context.forward_tanh(g, s, obs);
        let qc = self.q_comp.forward(g, s, ctx);
        let qb = self.q_band.forward(g, s, ctx);
        let m = self.model_emb.forward(g, s, &input.models);
        let b = self.batch_enc.forward(g, s, &input.batches);
        let z = self.split_enc.forward(g, s, &input.splits);
        let feat = g.concat_cols(&[m, b, z]);
        let kh = self.key.forward_tanh(g, s, feat);
        let kc = self.k_comp.forward(g, s, kh);
        let kb = self.k_band.forward(g, s, kh);
        let scale = 1.0 / (self.dims.attn as f64).sqrt();
        let sc = g.grouped_row_dot(qc, kc, k);
        let sb = g.grouped_row_dot(qb, kb, k);
        (g.scale(sc, scale), g.scale(sb, scale))
    }

    /// Per-server weights. With `explore`, Gaussian noise with the learned
    /// standard deviation perturbs the scores of associated users before
    /// the softmax.
    pub fn act<R: Rng + ?Sized>(&self, input: &AllocInput, rng: &mut R, explore: bool) -> Vec<AllocSample> {
        let k = self.dims.users;
        let mut g = Graph::new();
        let (sc, sb) = self.scores(&mut g, input);
        let sigma = self.store.value(self.log_std).item().exp();
        let log_std = self.store.value(self.log_std).item();
        (0..input.len())
            .map(|r| {
                let active = &input.active[r * k..(r + 1) * k];
                let mut log_prob = 0.0;
                let mut perturb = |row: &[f64]| -> Vec<f64> {
                    row.iter()
                        .zip(active)
                        .map(|(&mu, &a)| {
                            if !(explore && a) {
                                return mu;
                            }
                            let eps: f64 = StandardNormal.sample(rng);
                            log_prob += -0.5 * eps * eps - log_std - 0.5 * (2.0 * std::f64::consts::PI).ln();
                            mu + sigma * eps
                        })
                        .collect()
                };
                let comp_scores = perturb(g.value(sc).row(r));
                let band_scores = perturb(g.value(sb).row(r));
                let action = if active.contains(&true) {
                    AllocAction {
                        comp: edgecollab_neural::masked_softmax(&comp_scores, active).expect("active user"),
                        band: edgecollab_neural::masked_softmax(&band_scores, active).expect("active user"),
                    }
                } else {
                    AllocAction::uniform(k)
                };
                AllocSample {
                    action,
                    comp_scores,
                    band_scores,
                    log_prob,
                }
            })
            .collect()
    }

    /// Differentiable log-density (`B x 1`) of recorded perturbed scores
    /// and the mean Gaussian entropy per record (`1 x 1`).
    pub fn evaluate(&self, g: &mut Graph, input: &AllocInput, comp: &[Vec<f64>], band: &[Vec<f64>]) -> (Var, Var) {
        let k = self.dims.users;
        let b = input.len();
        let (sc, sb) = self.scores(g, input);
        let ls = g.param(&self.store, self.log_std);
        let xc = Tensor2::from_vec(b, k, comp.concat());
        let xb = Tensor2::from_vec(b, k, band.concat());
        let lc = g.gaussian_log_prob(sc, ls, xc, &input.active);
        let lb = g.gaussian_log_prob(sb, ls, xb, &input.active);
        let logp = g.add(lc, lb);
        let dims_per_record = 2.0 * input.active.iter().filter(|&&a| a).count() as f64 / b.max(1) as f64;
        let c = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        let scaled = g.scale(ls, dims_per_record);
        let entropy = g.add_scalar(scaled, c * dims_per_record);
        (logp, entropy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input(active: Vec<bool>, models: Vec<usize>) -> AllocInput {
        let k = active.len();
        AllocInput {
            obs: Tensor2::filled(1, 3 * k, 0.3),
            models,
            batches: vec![0.5; k],
            splits: vec![0.25; k],
            active,
        }
    }

    fn policy(users: usize) -> AllocPolicy {
        AllocPolicy::new(Dims::new(3, 1, users, 4).with_hidden(8), -1.0, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn single_and_symmetric_users() {
        let p = policy(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = &p.act(&input(vec![false, true, false], vec![0, 1, 2]), &mut rng, true)[0];
        assert_eq!(one.action.comp, vec![0.0, 1.0, 0.0]);
        assert_eq!(one.action.band, vec![0.0, 1.0, 0.0]);
        let two = &p.act(&input(vec![true, true, false], vec![2, 2, 0]), &mut rng, false)[0];
        assert_eq!(two.action.comp[..2], [0.5, 0.5]);
        assert_eq!(two.action.band[..2], [0.5, 0.5]);
        assert_eq!(two.log_prob, 0.0);
    }

    #[test]
    fn recorded_log_prob_matches_density() {
        let p = policy(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inp = input(vec![true, false, true, true], vec![0, 1, 2, 1]);
        let s = &p.act(&inp, &mut rng, true)[0];
        let mut g = Graph::new();
        let (lp, _) = p.evaluate(&mut g, &inp, &[s.comp_scores.clone()], &[s.band_scores.clone()]);
        assert!((g.value(lp).item() - s.log_prob).abs() < 1e-10);
    }
}
