//! State-value networks.

use edgecollab_neural::{Graph, Mlp, ParamStore, Tensor2, Var};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Critic {
    pub store: ParamStore,
    net: Mlp,
    inputs: usize,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let net = Mlp::new(&mut store, name, &[inputs, hidden, hidden, 1], 1.0, rng);
        Self { store, net, inputs }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn forward(&self, g: &mut Graph, rows: &Tensor2) -> Var {
        let x = g.input(rows.clone());
        self.net.forward(g, &self.store, x)
    }

    /// Values (in the critic's normalized scale) of each row.
    pub fn values(&self, rows: &Tensor2) -> Vec<f64> {
        if rows.rows() == 0 {
            return Vec::new();
        }
        let mut g = Graph::new();
        let v = self.forward(&mut g, rows);
        g.value(v).data().to_vec()
    }

    /// Mean squared error against `targets`.
    pub fn loss(&self, g: &mut Graph, rows: &Tensor2, targets: &[f64]) -> Var {
        let v = self.forward(g, rows);
        let t = g.input(Tensor2::column(targets.to_vec()));
        let d = g.sub(v, t);
        let sq = g.square(d);
        g.mean_all(sq)
    }
}
