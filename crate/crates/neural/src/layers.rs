//! Parameterized building blocks. Each layer owns ids into a [`ParamStore`]
//! and records its forward pass on a [`Graph`].

use rand::Rng;

use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            w: store.add_weight(format!("{name}.w"), inputs, outputs, gain, rng),
            b: store.add_zeros(format!("{name}.b"), 1, outputs),
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        assert_eq!(
            g.value(x).cols(),
            self.inputs,
            "linear layer expects {} inputs, got {}",
            self.inputs,
            g.value(x).cols()
        );
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let xw = g.matmul(x, w);
        g.add_bias(xw, b)
    }
}

/// Affine layers with Tanh between them; the last layer is linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists the input width, hidden widths and output width.
    /// Hidden layers use gain sqrt(2); the head uses `head_gain`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        head_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { head_gain } else { 2f64.sqrt() };
                Linear::new(store, &format!("{name}.{i}"), widths[i], widths[i + 1], gain, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(g, store, h);
            if i + 1 < self.layers.len() {
                h = g.tanh(h);
            }
        }
        h
    }

    /// Forward pass with a Tanh after every layer, including the last.
    pub fn forward_tanh(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let h = self.forward(g, store, x);
        g.tanh(h)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }
}

/// Gated recurrent unit:
/// `z = σ(x Wz + h Uz + bz)`, `r = σ(x Wr + h Ur + br)`,
/// `n = tanh(x Wn + bn + r ⊙ (h Un + bhn))`, `h' = (1 - z) ⊙ n + z ⊙ h`.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub wz: Linear,
    pub uz: ParamId,
    pub wr: Linear,
    pub ur: ParamId,
    pub wn: Linear,
    pub un: Linear,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            wz: Linear::new(store, &format!("{name}.wz"), inputs, hidden, 1.0, rng),
            uz: store.add_weight(format!("{name}.uz"), hidden, hidden, 1.0, rng),
            wr: Linear::new(store, &format!("{name}.wr"), inputs, hidden, 1.0, rng),
            ur: store.add_weight(format!("{name}.ur"), hidden, hidden, 1.0, rng),
            wn: Linear::new(store, &format!("{name}.wn"), inputs, hidden, 1.0, rng),
            un: Linear::new(store, &format!("{name}.un"), hidden, hidden, 1.0, rng),
            hidden,
        }
    }

    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: Var, h: Var) -> Var {
        assert_eq!(g.value(h).cols(), self.hidden, "hidden width");
        let gate = |g: &mut Graph, lin: &Linear, u: ParamId| {
            let xa = lin.forward(g, store, x);
            let uv = g.param(store, u);
            let hu = g.matmul(h, uv);
            let s = g.add(xa, hu);
            g.sigmoid(s)
        };
        let z = gate(g, &self.wz, self.uz);
        let r = gate(g, &self.wr, self.ur);
        let xn = self.wn.forward(g, store, x);
        let hn = self.un.forward(g, store, h);
        let rh = g.mul(r, hn);
        let pre = g.add(xn, rh);
        let n = g.tanh(pre);
        let keep = g.one_minus(z);
        let a = g.mul(keep, n);
        let b = g.mul(z, h);
        g.add(a, b)
    }
}

/// Learned lookup table, one row per id.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub count: usize,
    pub width: usize,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, count: usize, width: usize, rng: &mut R) -> Self {
        Self {
            table: store.add_weight(format!("{name}.table"), count, width, 1.0, rng),
            count,
            width,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Var {
        let t = g.param(store, self.table);
        g.embedding(t, ids)
    }
}

/// `tanh(x W + b)` for a scalar feature per row.
#[derive(Debug, Clone)]
pub struct ScalarEncoder {
    pub lin: Linear,
}

impl ScalarEncoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, width: usize, rng: &mut R) -> Self {
        Self {
            lin: Linear::new(store, name, 1, width, 1.0, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, values: &[f64]) -> Var {
        let x = g.input(Tensor2::column(values.to_vec()));
        let y = self.lin.forward(g, store, x);
        g.tanh(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_mlp_gives_zero() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 4, 2], 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let mut g = Graph::new();
        let x = g.input(Tensor2::from_rows(&[vec![1.0, 2.0, 3.0]]));
        let y = mlp.forward(&mut g, &store, x);
        assert_eq!(g.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_head_is_affine() {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[1, 1], 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        *store.value_mut(mlp.layers[0].w) = Tensor2::scalar(-2.5);
        let mut g = Graph::new();
        let x = g.input(Tensor2::column(vec![3.0, -1.0]));
        let y = mlp.forward(&mut g, &store, x);
        assert_eq!(g.value(y).data(), &[-7.5, 2.5]);
    }

    #[test]
    fn zero_gru_keeps_zero_hidden() {
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", 3, 4, &mut ChaCha8Rng::seed_from_u64(0));
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let mut g = Graph::new();
        let x = g.input(Tensor2::zeros(2, 3));
        let h = g.input(Tensor2::zeros(2, 4));
        let h2 = gru.step(&mut g, &store, x, h);
        assert!(g.value(h2).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gru_hidden_stays_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "g", 5, 6, &mut rng);
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).scale_assign(2.0);
        }
        let mut g = Graph::new();
        let mut h = g.input(Tensor2::zeros(3, 6));
        for t in 0..20 {
            let x = g.input(Tensor2::filled(3, 5, (t as f64 - 10.0) * 0.3));
            h = gru.step(&mut g, &store, x, h);
            assert!(g.value(h).data().iter().all(|v| v.abs() < 1.0));
        }
    }
}
