//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor2>,
    v: Vec<Tensor2>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros = || store.ids().map(|id| {
            let (r, c) = store.value(id).shape();
            Tensor2::zeros(r, c)
        });
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros().collect(),
            v: zeros().collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the store's gradients. A zero learning rate
    /// leaves the parameters untouched.
    pub fn step(&mut self, store: &mut ParamStore) {
        assert_eq!(self.m.len(), store.len(), "optimizer built for a different store");
        self.step += 1;
        if self.lr == 0.0 {
            return;
        }
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let ids: Vec<_> = store.ids().collect();
        for (n, id) in ids.into_iter().enumerate() {
            let g = store.grad(id).data().to_vec();
            let (m, v) = (self.m[n].data_mut(), self.v[n].data_mut());
            let p = store.value_mut(id).data_mut();
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor2::row_vector(vec![3.0, -2.0]));
        let mut opt = Adam::new(&store, 0.05);
        for _ in 0..2000 {
            store.zero_grad();
            let mut g = Graph::new();
            let wv = g.param(&store, w);
            let t = g.input(Tensor2::row_vector(vec![1.0, 0.5]));
            let d = g.sub(wv, t);
            let sq = g.square(d);
            let loss = g.mean_all(sq);
            g.backward(loss, &mut store);
            opt.step(&mut store);
        }
        let v = store.value(w).data();
        assert!((v[0] - 1.0).abs() < 1e-3 && (v[1] - 0.5).abs() < 1e-3, "{v:?}");
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor2::scalar(1.5));
        store.grad_mut(w).data_mut()[0] = 4.0;
        let mut opt = Adam::new(&store, 0.0);
        opt.step(&mut store);
        assert_eq!(store.value(w).item(), 1.5);
    }
}
