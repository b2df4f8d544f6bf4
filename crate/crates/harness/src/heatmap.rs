//! Per-user cost heatmap: every (algorithm, user) cell ranked into octile
//! bands pooled across all algorithms.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::HarnessError;
use crate::metrics::{MetricsRow, Phase, Status};

pub const BANDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub algorithm: String,
    pub user: usize,
    pub cost: f64,
    /// 1 for the cheapest octile, 8 for the most expensive.
    pub band: usize,
}

/// Band of `value` among `pool`: `1 + floor(8·#{strictly smaller}/n)`.
/// Ties share a band, so a uniform pool is all band 1.
pub fn octile_band(value: f64, pool: &[f64]) -> usize {
    let less = pool.iter().filter(|&&p| p < value).count();
    1 + BANDS * less / pool.len()
}

/// Averages each algorithm's per-user evaluation costs over its runs and
/// ranks every cell. Cells come out ordered by algorithm, then user.
pub fn heatmap(rows: &[MetricsRow]) -> Result<Vec<HeatmapCell>, HarnessError> {
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.phase == Phase::Eval && r.status == Status::Ok) {
        let costs = row.per_user_costs()?;
        let entry = sums.entry(&row.algorithm).or_insert_with(|| (vec![0.0; costs.len()], 0));
        if entry.0.len() != costs.len() {
            return Err(HarnessError::Plan(format!(
                "{}: {} users, expected {}",
                row.run_id,
                costs.len(),
                entry.0.len()
            )));
        }
        for (s, c) in entry.0.iter_mut().zip(&costs) {
            *s += c;
        }
        entry.1 += 1;
    }
    let means: Vec<(&str, Vec<f64>)> = sums
        .into_iter()
        .map(|(alg, (s, n))| (alg, s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    let pool: Vec<f64> = means.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    if pool.is_empty() {
        return Err(HarnessError::Plan("no successful evaluation rows with per-user costs".into()));
    }
    Ok(means
        .iter()
        .flat_map(|(alg, m)| {
            m.iter().enumerate().map(|(user, &cost)| HeatmapCell {
                algorithm: alg.to_string(),
                user,
                cost,
                band: octile_band(cost, &pool),
            })
        })
        .collect())
}

pub fn write_heatmap<W: Write>(out: W, cells: &[HeatmapCell]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))?;
    Ok(())
}
