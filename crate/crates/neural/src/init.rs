//! Orthogonal weight initialization.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::Tensor2;

/// Random `rows x cols` matrix with orthonormal rows (if `rows <= cols`) or
/// columns (otherwise), scaled by `gain`.
pub fn orthogonal_init<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Tensor2 {
    let (n, m) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        // Two Gram-Schmidt passes keep the basis orthogonal to machine precision.
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = Tensor2::zeros(rows, cols);
    for (i, b) in basis.iter().enumerate() {
        for (j, &x) in b.iter().enumerate() {
            if rows <= cols {
                out.set(i, j, gain * x);
            } else {
                out.set(j, i, gain * x);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_dev_from_scaled_identity(g: &Tensor2, scale: f64) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let want = if i == j { scale } else { 0.0 };
                dev = dev.max((g.get(i, j) - want).abs());
            }
        }
        dev
    }

    #[test]
    fn square_gram_is_identity() {
        let w = orthogonal_init(4, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(max_dev_from_scaled_identity(&w.transpose().matmul(&w), 1.0) < 1e-5);
        let w = orthogonal_init(6, 6, 2.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(max_dev_from_scaled_identity(&w.transpose().matmul(&w), 4.0) < 1e-5);
    }

    #[test]
    fn wide_and_tall_shapes() {
        let w = orthogonal_init(2, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(max_dev_from_scaled_identity(&w.matmul(&w.transpose()), 1.0) < 1e-5);
        let w = orthogonal_init(5, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(max_dev_from_scaled_identity(&w.transpose().matmul(&w), 1.0) < 1e-5);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = orthogonal_init(8, 5, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = orthogonal_init(8, 5, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
