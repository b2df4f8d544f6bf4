//! Long-format metric rows shared by training and evaluation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use edgecollab_core::cost::CostWeights;
use edgecollab_marl::{EvalReport, IterationMetrics};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::plan::RunSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// One CSV row. Metric cells are empty on failed rows; `lambda_before` and
/// the layer rewards are empty on evaluation rows, `per_user_cost` on
/// training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub algorithm: String,
    pub axis: String,
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub phase: Phase,
    /// Training iteration, or the number of completed iterations for
    /// evaluation rows.
    pub iteration: usize,
    pub status: Status,
    /// `μ1·privacy + μ2·energy` per user and slot.
    pub mean_user_cost: Option<f64>,
    pub mean_delay: Option<f64>,
    pub mean_energy: Option<f64>,
    pub mean_privacy: Option<f64>,
    /// Share of requests served from a deployed model.
    pub hit_rate: Option<f64>,
    /// Share of requests that hit and met the deadline.
    pub success_rate: Option<f64>,
    pub lambda_before: Option<f64>,
    pub lambda: Option<f64>,
    pub user_reward: Option<f64>,
    pub alloc_reward: Option<f64>,
    pub deploy_reward: Option<f64>,
    /// Semicolon-separated per-user costs.
    pub per_user_cost: String,
    pub message: String,
}

impl MetricsRow {
    fn blank(run: &RunSpec, phase: Phase, iteration: usize, status: Status) -> Self {
        Self {
            run_id: run.id.clone(),
            algorithm: run.algorithm.clone(),
            axis: run.axis.map(|a| a.name().to_string()).unwrap_or_default(),
            axis_value: run.axis_value,
            seed: run.seed,
            phase,
            iteration,
            status,
            mean_user_cost: None,
            mean_delay: None,
            mean_energy: None,
            mean_privacy: None,
            hit_rate: None,
            success_rate: None,
            lambda_before: None,
            lambda: None,
            user_reward: None,
            alloc_reward: None,
            deploy_reward: None,
            per_user_cost: String::new(),
            message: String::new(),
        }
    }

    pub fn train(run: &RunSpec, m: &IterationMetrics, w: &CostWeights) -> Self {
        Self {
            mean_user_cost: Some(w.mu1 * m.mean_privacy + w.mu2 * m.mean_energy),
            mean_delay: Some(m.mean_delay),
            mean_energy: Some(m.mean_energy),
            mean_privacy: Some(m.mean_privacy),
            hit_rate: Some(m.hit_rate),
            success_rate: Some(m.success_rate),
            lambda_before: Some(m.lambda_before),
            lambda: Some(m.lambda),
            user_reward: Some(m.user_reward),
            alloc_reward: Some(m.alloc_reward),
            deploy_reward: Some(m.deploy_reward),
            ..Self::blank(run, Phase::Train, m.iteration, Status::Ok)
        }
    }

    pub fn eval(run: &RunSpec, iterations: usize, r: &EvalReport, lambda: f64) -> Self {
        Self {
            mean_user_cost: Some(r.mean_cost),
            mean_delay: Some(r.mean_delay),
            mean_energy: Some(r.mean_energy),
            mean_privacy: Some(r.mean_privacy),
            hit_rate: Some(r.hit_rate),
            success_rate: Some(r.success_rate),
            lambda: Some(lambda),
            user_reward: Some(r.mean_user_reward),
            per_user_cost: join(&r.per_user_cost),
            ..Self::blank(run, Phase::Eval, iterations, Status::Ok)
        }
    }

    pub fn failed(run: &RunSpec, phase: Phase, iteration: usize, message: String) -> Self {
        Self {
            message,
            ..Self::blank(run, phase, iteration, Status::Failed)
        }
    }

    pub fn per_user_costs(&self) -> Result<Vec<f64>, HarnessError> {
        if self.per_user_cost.is_empty() {
            return Ok(Vec::new());
        }
        self.per_user_cost
            .split(';')
            .map(|s| {
                s.parse()
                    .map_err(|_| HarnessError::Plan(format!("{}: bad per-user cost {s:?}", self.run_id)))
            })
            .collect()
    }

    /// Row invariants: non-negative delay, rates in `[0, 1]`.
    pub fn check(&self) -> Result<(), String> {
        if let Some(d) = self.mean_delay {
            if !(d >= 0.0) {
                return Err(format!("{}: negative delay {d}", self.run_id));
            }
        }
        for (name, v) in [("hit_rate", self.hit_rate), ("success_rate", self.success_rate)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("{}: {name} {v} outside [0, 1]", self.run_id));
                }
            }
        }
        Ok(())
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes `rows` with a header.
pub fn write_rows<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
    Ok(())
}

pub fn save_rows(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_rows(file, rows)
}

pub fn load_rows(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<MetricsRow>, _>>()
        .map_err(Into::into)
}
