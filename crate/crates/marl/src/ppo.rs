//! PPO clipped surrogate.

use edgecollab_neural::{Graph, Tensor2, Var};

/// `mean(min(ρA, clip(ρ, 1-ε, 1+ε)A))` with `ρ = exp(logp_new - logp_old)`.
pub fn ppo_clip_objective(logp_new: &[f64], logp_old: &[f64], adv: &[f64], clip_eps: f64) -> f64 {
    assert_eq!(logp_new.len(), logp_old.len());
    assert_eq!(logp_new.len(), adv.len());
    if adv.is_empty() {
        return 0.0;
    }
    let total: f64 = logp_new
        .iter()
        .zip(logp_old)
        .zip(adv)
        .map(|((n, o), a)| {
            let ratio = (n - o).exp();
            (ratio * a).min(ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * a)
        })
        .sum();
    total / adv.len() as f64
}

/// Differentiable form of [`ppo_clip_objective`]; `logp_new` is a column,
/// the old log-probabilities and advantages are constants.
pub fn ppo_clip_graph(g: &mut Graph, logp_new: Var, logp_old: &[f64], adv: &[f64], clip_eps: f64) -> Var {
    let old = g.input(Tensor2::column(logp_old.to_vec()));
    let a = g.input(Tensor2::column(adv.to_vec()));
    let diff = g.sub(logp_new, old);
    let ratio = g.exp(diff);
    let unclipped = g.mul(ratio, a);
    let clipped_ratio = g.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    let clipped = g.mul(clipped_ratio, a);
    let m = g.min(unclipped, clipped);
    g.mean_all(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgecollab_neural::ParamStore;

    #[test]
    fn worked_examples() {
        assert_eq!(ppo_clip_objective(&[0.3, -1.0], &[0.3, -1.0], &[2.0, -1.0], 0.2), 0.5);
        let two = 2f64.ln();
        assert!((ppo_clip_objective(&[two], &[0.0], &[1.0], 0.2) - 1.2).abs() < 1e-12);
        assert!((ppo_clip_objective(&[0.5f64.ln()], &[0.0], &[-1.0], 0.2) + 0.8).abs() < 1e-12);
    }

    fn grad_at(logp: f64, adv: f64) -> (f64, f64) {
        let mut store = ParamStore::new();
        let id = store.add("logp", Tensor2::scalar(logp));
        let mut g = Graph::new();
        let p = g.param(&store, id);
        let obj = ppo_clip_graph(&mut g, p, &[0.0], &[adv], 0.2);
        g.backward(obj, &mut store);
        (g.value(obj).item(), store.grad(id).item())
    }

    #[test]
    fn clipped_branch_has_zero_gradient() {
        // ratio 2 with positive advantage and ratio 0.5 with negative one.
        assert_eq!(grad_at(2f64.ln(), 1.0).1, 0.0);
        assert_eq!(grad_at(0.5f64.ln(), -1.0).1, 0.0);
        // Inside the trust region the gradient is ρA.
        let (v, dg) = grad_at(1.1f64.ln(), 3.0);
        assert!((v - 3.3).abs() < 1e-12 && (dg - 3.3).abs() < 1e-12);
        // Outside but on the unclipped side: ratio 0.5 with positive advantage.
        let (_, dg) = grad_at(0.5f64.ln(), 1.0);
        assert!((dg - 0.5).abs() < 1e-12);
    }
}
