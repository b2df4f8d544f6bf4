//! Per-user delay, energy and privacy cost, and the per-slot system cost.

use serde::{Deserialize, Serialize};

use crate::error::CostError;
use crate::profiles::PartitionSummary;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayBreakdown {
    /// Parameter download of the device-side layers.
    pub download_s: f64,
    pub local_s: f64,
    /// Feature upload.
    pub upload_s: f64,
    pub edge_s: f64,
    pub total_s: f64,
    /// The requested model was not deployed on the associated server.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    /// Privacy weight.
    pub mu1: f64,
    /// Energy weight.
    pub mu2: f64,
    /// Delay-violation weight in the user reward.
    pub mu3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Delay constraint, seconds.
    pub tau_bar: f64,
    /// Delay charged for a cache miss, seconds.
    pub tau_fail: f64,
    /// User reward on a cache miss.
    pub r_fail: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            mu1: 5.0,
            mu2: 5.0,
            mu3: 10.0,
            alpha1: 0.31,
            alpha2: 1.88,
            tau_bar: 3.0,
            tau_fail: 15.0,
            r_fail: -50.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("tau_bar", self.tau_bar),
        ] {
            if !(v >= 0.0) {
                return Err(format!("{name} must be non-negative"));
            }
        }
        if !(self.tau_fail > self.tau_bar) {
            return Err("tau_fail must exceed tau_bar".into());
        }
        Ok(())
    }
}

fn transfer_time(bits: f64, rate: f64, link: &'static str) -> Result<f64, CostError> {
    if bits == 0.0 {
        return Ok(0.0);
    }
    if !(rate > 0.0) {
        return Err(CostError::InfeasibleLink { link, volume: bits });
    }
    Ok(bits / rate)
}

fn compute_time(work: f64, capacity: f64, resource: &'static str) -> Result<f64, CostError> {
    if work == 0.0 {
        return Ok(0.0);
    }
    if !(capacity > 0.0) {
        return Err(CostError::NoCapacity { resource, work });
    }
    Ok(work / capacity)
}

/// Delay of one request. Volumes are bytes and converted to bits against
/// bit rates; workloads are FLOPs per sample scaled by the batch size.
#[allow(clippy::too_many_arguments)]
pub fn delay_components(
    summary: &PartitionSummary,
    batch: u32,
    rate_down: f64,
    rate_up: f64,
    f_user: f64,
    f_alloc: f64,
    hit: bool,
    tau_fail: f64,
) -> Result<DelayBreakdown, CostError> {
    if !hit {
        return Ok(DelayBreakdown {
            total_s: tau_fail,
            failed: true,
            ..DelayBreakdown::default()
        });
    }
    let batch = batch as f64;
    let download_s = transfer_time(8.0 * summary.download_bytes as f64, rate_down, "downlink")?;
    let local_s = compute_time(batch * summary.local_flops as f64, f_user, "device")?;
    let upload_s = transfer_time(8.0 * batch * summary.upload_bytes as f64, rate_up, "uplink")?;
    let edge_s = compute_time(batch * summary.edge_flops as f64, f_alloc, "edge")?;
    Ok(DelayBreakdown {
        download_s,
        local_s,
        upload_s,
        edge_s,
        total_s: download_s + local_s + upload_s + edge_s,
        failed: false,
    })
}

/// Device energy: local compute plus feature-upload transmission.
pub fn energy(summary: &PartitionSummary, batch: u32, eps: f64, p_user_w: f64, upload_s: f64) -> f64 {
    eps * batch as f64 * summary.local_flops as f64 + p_user_w * upload_s
}

/// Privacy cost with the raw input size expressed in megabytes.
pub fn privacy_cost(leakage: f64, pre_k: f64, batch: u32, raw_mb: f64, w: &CostWeights) -> f64 {
    (w.alpha1 + w.alpha2 * pre_k) * leakage * batch as f64 * raw_mb
}

pub fn slot_cost(per_user_energy: &[f64], per_user_privacy: &[f64], w: &CostWeights) -> Result<f64, CostError> {
    let k = per_user_energy.len();
    if k == 0 || per_user_privacy.len() != k {
        return Err(CostError::BadLengths {
            energy: k,
            privacy: per_user_privacy.len(),
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
    Ok(w.mu1 * mean(per_user_privacy) + w.mu2 * mean(per_user_energy))
}
