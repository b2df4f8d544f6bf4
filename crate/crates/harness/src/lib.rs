//! Experiment orchestration: TOML plans sweeping one system parameter over
//! several algorithms and seeds, long-format CSV metrics, per-run manifests
//! and checkpoints, re-evaluation from checkpoints and per-user cost
//! heatmaps.

pub mod error;
pub mod heatmap;
pub mod metrics;
pub mod plan;
pub mod run;

pub use error::HarnessError;
pub use heatmap::{heatmap, octile_band, write_heatmap, HeatmapCell};
pub use metrics::{load_rows, save_rows, write_rows, MetricsRow, Phase, Status};
pub use plan::{load_system, AlgorithmChoice, ExperimentPlan, Preset, RunSpec, Sweep, SweepAxis};
pub use run::{evaluate_checkpoint, evaluate_run_dir, PlanOutcome, Progress, RunManifest, RunOutcome, Runner};
