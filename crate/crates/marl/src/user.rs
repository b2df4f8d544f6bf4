//! User-layer policy: a shared trunk with a server head and a split head.

use edgecollab_core::UserAction;
use edgecollab_neural::{Embedding, Graph, Linear, MaskedCategorical, Mlp, ParamStore, ScalarEncoder, Tensor2, Var};
use rand::Rng;

use crate::dims::Dims;

/// A batch of user observations.
#[derive(Debug, Clone, PartialEq)]
pub struct UserInput {
    pub models: Vec<usize>,
    /// Normalized batch sizes.
    pub batches: Vec<f64>,
    /// Per row `[vec(X), agent one-hot]`.
    pub rest: Tensor2,
    /// Layer count of each requested model; splits above it are masked.
    pub layers: Vec<usize>,
}

impl UserInput {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Rows `idx` in order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let cols = self.rest.cols();
        let mut rest = Tensor2::zeros(idx.len(), cols);
        for (r, &i) in idx.iter().enumerate() {
            rest.row_mut(r).copy_from_slice(self.rest.row(i));
        }
        Self {
            models: idx.iter().map(|&i| self.models[i]).collect(),
            batches: idx.iter().map(|&i| self.batches[i]).collect(),
            rest,
            layers: idx.iter().map(|&i| self.layers[i]).collect(),
        }
    }

    /// Row-wise concatenation.
    pub fn concat(parts: &[UserInput]) -> Self {
        let cols = parts.first().map_or(0, |p| p.rest.cols());
        let rows: usize = parts.iter().map(|p| p.len()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        let mut out = Self {
            models: Vec::with_capacity(rows),
            batches: Vec::with_capacity(rows),
            rest: Tensor2::zeros(0, cols),
            layers: Vec::with_capacity(rows),
        };
        for p in parts {
            out.models.extend_from_slice(&p.models);
            out.batches.extend_from_slice(&p.batches);
            out.layers.extend_from_slice(&p.layers);
            data.extend_from_slice(p.rest.data());
        }
        out.rest = Tensor2::from_vec(rows, cols, data);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSample {
    pub action: UserAction,
    pub log_prob: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct UserPolicy {
    pub store: ParamStore,
    dims: Dims,
    model_emb: Embedding,
    batch_enc: ScalarEncoder,
    trunk: Mlp,
    server_head: Linear,
    split_head: Linear,
}

impl UserPolicy {
    pub fn new<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let e = dims.embed;
        let model_emb = Embedding::new(&mut store, "model_emb", dims.models, e, rng);
        let batch_enc = ScalarEncoder::new(&mut store, "batch_enc", e, rng);
        let input = 2 * e + dims.models * dims.servers + dims.users;
        let trunk = Mlp::new(&mut store, "trunk", &[input, dims.hidden, dims.hidden], 2f64.sqrt(), rng);
        let server_head = Linear::new(&mut store, "server_head", dims.hidden, dims.servers, 0.01, rng);
        let split_head = Linear::new(&mut store, "split_head", dims.hidden, dims.max_layers + 1, 0.01, rng);
        Self {
            store,
            dims,
            model_emb,
            batch_enc,
            trunk,
            server_head,
            split_head,
        }
    }

    /// Server and split logits.
    pub fn forward(&self, g: &mut Graph, input: &UserInput) -> (Var, Var) {
        let s = &self.store;
        let m = self.model_emb.forward(g, s, &input.models);
        let b = self.batch_enc.forward(g, s, &input.batches);
        let rest = g.input(input.rest.clone());
        let x = g.concat_cols(&[m, b, rest]);
        let h = self.trunk.forward_tanh(g, s, x);
        (self.server_head.forward(g, s, h), self.split_head.forward(g, s, h))
    }

    pub fn split_mask(&self, layers: &[usize]) -> Vec<bool> {
        let width = self.dims.max_layers + 1;
        layers.iter().flat_map(|&l| (0..width).map(move |z| z <= l)).collect()
    }

    /// Samples (or, with `greedy`, takes the mode of) both heads per row.
    /// The joint log-probability is the sum of the head log-probabilities.
    pub fn act<R: Rng + ?Sized>(&self, input: &UserInput, rng: &mut R, greedy: bool) -> Vec<UserSample> {
        let mut g = Graph::new();
        let (sl, zl) = self.forward(&mut g, input);
        let (sl, zl) = (g.value(sl), g.value(zl));
        let server_mask = vec![true; self.dims.servers];
        let split_mask = self.split_mask(&input.layers);
        let width = self.dims.max_layers + 1;
        (0..input.len())
            .map(|r| {
                let ds = MaskedCategorical::new(sl.row(r), &server_mask).expect("servers are never masked");
                let dz = MaskedCategorical::new(zl.row(r), &split_mask[r * width..(r + 1) * width])
                    .expect("split 0 is always allowed");
                let (server, split) = if greedy {
                    (ds.mode(), dz.mode())
                } else {
                    (ds.sample(rng).0, dz.sample(rng).0)
                };
                UserSample {
                    action: UserAction { server, split },
                    log_prob: ds.log_prob(server) + dz.log_prob(split),
                    entropy: ds.entropy() + dz.entropy(),
                }
            })
            .collect()
    }

    /// Differentiable joint log-probabilities and entropies, both `B x 1`.
    pub fn evaluate(&self, g: &mut Graph, input: &UserInput, actions: &[UserAction]) -> (Var, Var) {
        let (sl, zl) = self.forward(g, input);
        let server_mask = vec![true; input.len() * self.dims.servers];
        let split_mask = self.split_mask(&input.layers);
        let servers: Vec<usize> = actions.iter().map(|a| a.server).collect();
        let splits: Vec<usize> = actions.iter().map(|a| a.split).collect();
        let lps = g.masked_log_prob_at(sl, &server_mask, &servers);
        let lpz = g.masked_log_prob_at(zl, &split_mask, &splits);
        let es = g.masked_entropy(sl, &server_mask);
        let ez = g.masked_entropy(zl, &split_mask);
        (g.add(lps, lpz), g.add(es, ez))
    }
}
