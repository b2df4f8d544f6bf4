//! Running normalization of critic targets.

use serde::{Deserialize, Serialize};

/// Exponentially debiased running mean and variance of value targets;
/// critics regress on normalized targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNorm {
    beta: f64,
    mean: f64,
    mean_sq: f64,
    debias: f64,
}

impl Default for ValueNorm {
    fn default() -> Self {
        Self::new(0.99999)
    }
}

impl ValueNorm {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            mean: 0.0,
            mean_sq: 0.0,
            debias: 0.0,
        }
    }

    pub fn update(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let sq = xs.iter().map(|x| x * x).sum::<f64>() / n;
        self.mean = self.beta * self.mean + (1.0 - self.beta) * m;
        self.mean_sq = self.beta * self.mean_sq + (1.0 - self.beta) * sq;
        self.debias = self.beta * self.debias + (1.0 - self.beta);
    }

    fn stats(&self) -> (f64, f64) {
        if self.debias <= 0.0 {
            return (0.0, 1.0);
        }
        let mean = self.mean / self.debias;
        let var = (self.mean_sq / self.debias - mean * mean).max(1e-4);
        (mean, var.sqrt())
    }

    pub fn normalize(&self, x: f64) -> f64 {
        let (m, s) = self.stats();
        (x - m) / s
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        let (m, s) = self.stats();
        y * s + m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_identity_before_data() {
        let mut v = ValueNorm::default();
        assert_eq!(v.normalize(3.0), 3.0);
        v.update(&[10.0, 20.0, 30.0]);
        let y = v.normalize(25.0);
        assert!((v.denormalize(y) - 25.0).abs() < 1e-9);
        assert!((v.normalize(20.0)).abs() < 1e-9);
    }
}
