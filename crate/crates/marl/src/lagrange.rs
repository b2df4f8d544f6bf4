//! Projected dual ascent on the shared delay multiplier.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    pub alpha: f64,
    pub bounds: [f64; 2],
    /// Per-step mean delay threshold, seconds.
    pub j_bar: f64,
    /// A frozen multiplier never moves (unconstrained training).
    pub frozen: bool,
}

impl LagrangeState {
    pub fn new(lambda: f64, alpha: f64, j_bar: f64) -> Self {
        Self {
            lambda,
            alpha,
            bounds: [0.0, 100.0],
            j_bar,
            frozen: false,
        }
    }

    pub fn frozen_at_zero(j_bar: f64) -> Self {
        Self {
            lambda: 0.0,
            alpha: 0.0,
            bounds: [0.0, 100.0],
            j_bar,
            frozen: true,
        }
    }

    /// `λ ← clamp(λ + α(Ĵ - J̄), lo, hi)`; returns the new value.
    pub fn update(&mut self, j_hat: f64) -> f64 {
        if !self.frozen {
            self.lambda = (self.lambda + self.alpha * (j_hat - self.j_bar)).clamp(self.bounds[0], self.bounds[1]);
        }
        self.lambda
    }
}
