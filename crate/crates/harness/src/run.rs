//! Plan execution: one fresh trainer per run, training rows, a greedy
//! evaluation row, a checkpoint and a manifest.
//!
//! Layout under the output root:
//!
//! ```text
//! <plan>/plan.json
//! <plan>/metrics.csv              every row of every run
//! <plan>/runs/<run>/metrics.csv
//! <plan>/runs/<run>/manifest.json
//! <plan>/runs/<run>/checkpoint.json   learned algorithms only
//! <plan>/runs/<run>/trace.csv         when traces are enabled
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use edgecollab_core::env::TraceWriter;
use edgecollab_core::{BaselineSpec, SystemConfig};
use edgecollab_marl::{EvalReport, Execution, IterationMetrics, TrainConfig, Trainer};
use edgecollab_neural::Checkpoint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;
use crate::metrics::{save_rows, MetricsRow, Phase, Status};
use crate::plan::{ExperimentPlan, RunSpec, SweepAxis};

/// Provenance of one run, written next to its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub plan: String,
    pub algorithm: String,
    pub spec: BaselineSpec,
    pub axis: Option<SweepAxis>,
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub iterations: usize,
    pub eval_episodes: usize,
    pub config: SystemConfig,
    pub train: TrainConfig,
    /// SHA-256 over config, hyperparameters, decision rules and seed.
    pub config_hash: String,
    pub code_version: String,
    pub status: Status,
    pub message: String,
    pub checkpoint: Option<String>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            id: self.run_id.clone(),
            algorithm: self.algorithm.clone(),
            spec: self.spec,
            axis: self.axis,
            axis_value: self.axis_value,
            seed: self.seed,
            config: self.config.clone(),
        }
    }
}

pub fn config_hash(config: &SystemConfig, train: &TrainConfig, spec: &BaselineSpec, seed: u64) -> String {
    let text = serde_json::to_string(&(config, train, spec, seed)).expect("hash input serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub enum Progress<'a> {
    Started(&'a RunSpec),
    Iteration(&'a RunSpec, &'a IterationMetrics),
    Finished(&'a RunOutcome),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: RunSpec,
    pub rows: Vec<MetricsRow>,
    pub eval: Option<EvalReport>,
    pub elapsed_s: f64,
    pub dir: PathBuf,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.status == Status::Failed)
    }

    pub fn train_rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| r.phase == Phase::Train)
    }

    pub fn eval_row(&self) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.phase == Phase::Eval && r.status == Status::Ok)
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub dir: PathBuf,
    pub runs: Vec<RunOutcome>,
}

impl PlanOutcome {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }
}

#[derive(Debug, Clone)]
pub struct Runner {
    pub out_root: PathBuf,
    pub execution: Execution,
    /// Also write per-slot traces of the evaluation episodes.
    pub traces: bool,
}

impl Runner {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        Self {
            out_root: out_root.into(),
            execution: Execution::default(),
            traces: false,
        }
    }

    /// Runs every point of `plan`. Failed runs leave `failed` rows in the
    /// metrics and never abort the plan; only output errors do.
    pub fn run_plan(&self, plan: &ExperimentPlan, progress: &mut dyn FnMut(Progress)) -> Result<PlanOutcome, HarnessError> {
        plan.validate()?;
        let dir = self.out_root.join(&plan.name);
        create_dir(&dir.join("runs"))?;
        write_json(&dir.join("plan.json"), plan)?;
        let mut runs = Vec::new();
        for run in plan.runs()? {
            progress(Progress::Started(&run));
            let outcome = self.run_one(plan, run, &dir, progress)?;
            progress(Progress::Finished(&outcome));
            runs.push(outcome);
        }
        let all: Vec<MetricsRow> = runs.iter().flat_map(|r| r.rows.iter().cloned()).collect();
        save_rows(dir.join("metrics.csv"), &all)?;
        Ok(PlanOutcome { dir, runs })
    }

    fn run_one(
        &self,
        plan: &ExperimentPlan,
        run: RunSpec,
        plan_dir: &Path,
        progress: &mut dyn FnMut(Progress),
    ) -> Result<RunOutcome, HarnessError> {
        let dir = plan_dir.join("runs").join(&run.id);
        create_dir(&dir)?;
        let start = Instant::now();
        let mut rows = Vec::new();
        let mut eval = None;
        let mut checkpoint = None;
        let mut failure = None;
        match build_trainer(&run, &plan.train) {
            Err(e) => failure = Some(e.to_string()),
            Ok(mut trainer) => {
                trainer.execution = self.execution;
                let weights = run.config.weights.clone();
                if run.spec.needs_training() {
                    for _ in 0..plan.iterations {
                        match trainer.train_iteration() {
                            Ok(m) => {
                                progress(Progress::Iteration(&run, &m));
                                rows.push(MetricsRow::train(&run, &m, &weights));
                            }
                            Err(e) => {
                                rows.push(MetricsRow::failed(&run, Phase::Train, trainer.iteration(), e.to_string()));
                                failure = Some(e.to_string());
                                break;
                            }
                        }
                    }
                }
                if failure.is_none() {
                    let trace = self.traces.then(|| dir.join("trace.csv"));
                    match evaluate_trainer(&trainer, &run, plan.eval_episodes, run.seed, trace.as_deref()) {
                        Ok((row, report)) => {
                            rows.push(row);
                            eval = Some(report);
                        }
                        Err(e) => {
                            rows.push(MetricsRow::failed(&run, Phase::Eval, trainer.iteration(), e.to_string()));
                            failure = Some(e.to_string());
                        }
                    }
                    if run.spec.needs_training() {
                        let path = dir.join("checkpoint.json");
                        trainer.checkpoint().save(&path).map_err(|e| HarnessError::io(&path, e))?;
                        checkpoint = Some("checkpoint.json".to_string());
                    }
                }
            }
        }
        if let (Some(msg), true) = (&failure, rows.iter().all(|r| r.status == Status::Ok)) {
            rows.push(MetricsRow::failed(&run, Phase::Eval, 0, msg.clone()));
        }
        save_rows(dir.join("metrics.csv"), &rows)?;
        let manifest = RunManifest {
            run_id: run.id.clone(),
            plan: plan.name.clone(),
            algorithm: run.algorithm.clone(),
            spec: run.spec,
            axis: run.axis,
            axis_value: run.axis_value,
            seed: run.seed,
            iterations: plan.iterations,
            eval_episodes: plan.eval_episodes,
            config: run.config.clone(),
            train: plan.train.clone(),
            config_hash: config_hash(&run.config, &plan.train, &run.spec, run.seed),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            status: if failure.is_some() { Status::Failed } else { Status::Ok },
            message: failure.unwrap_or_default(),
            checkpoint,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        Ok(RunOutcome {
            run,
            rows,
            eval,
            elapsed_s: start.elapsed().as_secs_f64(),
            dir,
        })
    }
}

fn build_trainer(run: &RunSpec, train: &TrainConfig) -> Result<Trainer, HarnessError> {
    let catalog = Arc::new(run.config.build_catalog()?);
    Ok(Trainer::new(&run.config, catalog, run.spec, train.clone(), run.seed)?)
}

/// Greedy evaluation of `trainer` as a metrics row, optionally streaming
/// every slot outcome to `trace`.
pub fn evaluate_trainer(
    trainer: &Trainer,
    run: &RunSpec,
    episodes: usize,
    seed: u64,
    trace: Option<&Path>,
) -> Result<(MetricsRow, EvalReport), HarnessError> {
    let (report, outcomes) = trainer.evaluate_traced(episodes, seed)?;
    if let Some(path) = trace {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut w = TraceWriter::new(BufWriter::new(file)).map_err(|e| HarnessError::io(path, e))?;
        for (episode, slots) in outcomes.iter().enumerate() {
            for o in slots {
                w.record(episode, o).map_err(|e| HarnessError::io(path, e))?;
            }
        }
        w.into_inner().flush().map_err(|e| HarnessError::io(path, e))?;
    }
    let row = MetricsRow::eval(run, trainer.iteration(), &report, trainer.lagrange.lambda);
    Ok((row, report))
}

/// Re-evaluates a finished run from its manifest and checkpoint.
pub fn evaluate_run_dir(
    dir: impl AsRef<Path>,
    episodes: Option<usize>,
    seed: Option<u64>,
    trace: Option<&Path>,
) -> Result<(MetricsRow, EvalReport), HarnessError> {
    let dir = dir.as_ref();
    let manifest = RunManifest::load(dir.join("manifest.json"))?;
    let checkpoint = match &manifest.checkpoint {
        Some(name) => Some(Checkpoint::load(dir.join(name))?),
        None => None,
    };
    evaluate_checkpoint(&manifest, checkpoint.as_ref(), episodes, seed, trace)
}

/// Evaluation of `checkpoint` under the manifest's configuration. Heuristic
/// algorithms take no checkpoint.
pub fn evaluate_checkpoint(
    manifest: &RunManifest,
    checkpoint: Option<&Checkpoint>,
    episodes: Option<usize>,
    seed: Option<u64>,
    trace: Option<&Path>,
) -> Result<(MetricsRow, EvalReport), HarnessError> {
    let run = manifest.run_spec();
    let mut trainer = build_trainer(&run, &manifest.train)?;
    match checkpoint {
        Some(c) => trainer.restore(c)?,
        None if run.spec.needs_training() => {
            return Err(HarnessError::Plan(format!("{}: learned algorithm without a checkpoint", run.id)))
        }
        None => {}
    }
    evaluate_trainer(
        &trainer,
        &run,
        episodes.unwrap_or(manifest.eval_episodes),
        seed.unwrap_or(manifest.seed),
        trace,
    )
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}
