//! Experiment plans: a base system, the algorithms to compare, an optional
//! one-dimensional sweep and the seeds to repeat every point with.
//!
//! Plans are TOML. `system` and `train` list overrides on top of the chosen
//! preset and the default hyperparameters:
//!
//! ```toml
//! name = "delay_constraint"
//! preset = "desk"
//! algorithms = ["hc-mappo-l", "h-mappo"]
//! seeds = [0, 1, 2]
//! iterations = 300
//! eval_episodes = 10
//!
//! [sweep]
//! axis = "tau_bar"
//! values = [2.0, 2.5, 3.0, 3.5, 4.0]
//!
//! [system.weights]
//! mu1 = 5.0
//!
//! [train]
//! hidden = 64
//! ```

use std::fmt;
use std::fs;
use std::path::Path;

use edgecollab_core::{Algorithm, BaselineSpec, CatalogSpec, SystemConfig};
use edgecollab_marl::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// J=3, K=8, I=6 with 100-slot episodes.
    #[default]
    Desk,
    /// Full-scale defaults: J=10, K=50, I=45.
    Full,
}

impl Preset {
    pub fn config(self) -> SystemConfig {
        match self {
            Preset::Desk => SystemConfig::desk(),
            Preset::Full => SystemConfig::default(),
        }
    }
}

/// A named algorithm or a custom combination of decision rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmChoice {
    Named(Algorithm),
    Custom { name: String, spec: BaselineSpec },
}

impl AlgorithmChoice {
    pub fn label(&self) -> String {
        match self {
            AlgorithmChoice::Named(a) => a.name().to_string(),
            AlgorithmChoice::Custom { name, .. } => name.clone(),
        }
    }

    pub fn spec(&self) -> BaselineSpec {
        match self {
            AlgorithmChoice::Named(a) => a.spec(),
            AlgorithmChoice::Custom { spec, .. } => *spec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of users `K`.
    Users,
    /// Number of edge servers `J`.
    Servers,
    /// Services per base family; the model count follows.
    ServicesPerModel,
    /// Delay constraint in seconds.
    TauBar,
    /// Centre of the user compute range, GFLOPS.
    UserCompute,
    /// Centre of the server compute range, GFLOPS.
    ServerCompute,
    /// Centre of the server storage range, GB.
    ServerStorage,
    /// Energy-to-privacy weight ratio `μ2/μ1` with `μ1` fixed.
    WeightRatio,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Users => "users",
            SweepAxis::Servers => "servers",
            SweepAxis::ServicesPerModel => "services_per_model",
            SweepAxis::TauBar => "tau_bar",
            SweepAxis::UserCompute => "user_compute",
            SweepAxis::ServerCompute => "server_compute",
            SweepAxis::ServerStorage => "server_storage",
            SweepAxis::WeightRatio => "weight_ratio",
        }
    }

    /// `base` with this axis set to `value`. Range axes become
    /// `[value - half_width, value + half_width]`.
    pub fn apply(self, base: &SystemConfig, value: f64, half_width: f64) -> Result<SystemConfig, HarnessError> {
        let bad = |m: String| HarnessError::Plan(format!("{} = {value}: {m}", self.name()));
        if !value.is_finite() {
            return Err(bad("value must be finite".into()));
        }
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(bad("expected a positive integer".into()))
            }
        };
        let range = [value - half_width, value + half_width];
        let mut cfg = base.clone();
        match self {
            SweepAxis::Users => cfg.num_users = count()?,
            SweepAxis::Servers => cfg.num_servers = count()?,
            SweepAxis::ServicesPerModel => {
                let n = count()?;
                match &mut cfg.catalog {
                    CatalogSpec::Synthetic {
                        families,
                        services_per_model,
                        ..
                    } => {
                        *services_per_model = n;
                        cfg.num_models = families.len() * n;
                    }
                    CatalogSpec::File { .. } => return Err(bad("needs a synthetic catalog".into())),
                }
            }
            SweepAxis::TauBar => cfg.weights.tau_bar = value,
            SweepAxis::UserCompute => cfg.user_compute_gflops = range,
            SweepAxis::ServerCompute => cfg.server_compute_gflops = range,
            SweepAxis::ServerStorage => cfg.server_storage_gb = range,
            SweepAxis::WeightRatio => cfg.weights.mu2 = value * cfg.weights.mu1,
        }
        cfg.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub half_width: f64,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_iterations() -> usize {
    300
}

fn default_eval_episodes() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    name: String,
    #[serde(default)]
    preset: Preset,
    #[serde(default)]
    system: toml::Table,
    algorithms: Vec<AlgorithmChoice>,
    sweep: Option<Sweep>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default = "default_iterations")]
    iterations: usize,
    #[serde(default = "default_eval_episodes")]
    eval_episodes: usize,
    #[serde(default)]
    train: toml::Table,
}

/// A fully resolved plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub system: SystemConfig,
    pub algorithms: Vec<AlgorithmChoice>,
    pub sweep: Option<Sweep>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub eval_episodes: usize,
    pub train: TrainConfig,
}

/// One (algorithm, axis value, seed) point of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub id: String,
    pub algorithm: String,
    pub spec: BaselineSpec,
    pub axis: Option<SweepAxis>,
    pub axis_value: Option<f64>,
    pub seed: u64,
    pub config: SystemConfig,
}

/// Recursively overlays `over` on `base`; tables merge, everything else
/// replaces.
pub fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `preset` with `overrides` applied, validated.
pub fn resolve_system(preset: Preset, overrides: toml::Table) -> Result<SystemConfig, HarnessError> {
    let mut table: toml::Table = toml::from_str(&preset.config().to_toml()).expect("config round-trips through TOML");
    merge_tables(&mut table, overrides);
    let cfg: SystemConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::Plan(format!("system: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, HarnessError> {
    toml::from_str(text).map_err(|source| HarnessError::Toml {
        path: origin.to_string(),
        source,
    })
}

/// Unreadable inputs are configuration errors, unlike unwritable outputs.
fn read_input(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Plan(format!("{}: {e}", path.display())))
}

/// Reads a system config file as overrides on `preset`.
pub fn load_system(path: impl AsRef<Path>, preset: Preset) -> Result<SystemConfig, HarnessError> {
    let path = path.as_ref();
    let text = read_input(path)?;
    resolve_system(preset, parse_toml(&text, &path.display().to_string())?)
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Self::parse(text, "<plan>")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = read_input(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn parse(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let file: PlanFile = parse_toml(text, origin)?;
        if file.train.contains_key("iterations") {
            return Err(HarnessError::Plan("set iterations at the top level of the plan".into()));
        }
        let mut train: TrainConfig = toml::Value::Table(file.train)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Plan(format!("train: {e}")))?;
        train.iterations = file.iterations;
        let plan = ExperimentPlan {
            name: file.name,
            system: resolve_system(file.preset, file.system)?,
            algorithms: file.algorithms,
            sweep: file.sweep,
            seeds: file.seeds,
            iterations: file.iterations,
            eval_episodes: file.eval_episodes,
            train,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Plan(m.into()));
        let safe = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if !safe(&self.name) {
            return bad("name must be non-empty and use only letters, digits, '-', '_' and '.'");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty");
        }
        let mut labels: Vec<String> = self.algorithms.iter().map(|a| a.label()).collect();
        if labels.iter().any(|l| !safe(l)) {
            return bad("algorithm names must use only letters, digits, '-', '_' and '.'");
        }
        labels.sort();
        labels.dedup();
        if labels.len() != self.algorithms.len() {
            return bad("algorithm names must be unique");
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep values must not be empty");
            }
            if !(s.half_width >= 0.0) {
                return bad("sweep half_width must be non-negative");
            }
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if self.train.iterations != self.iterations {
            return bad("train.iterations must equal iterations");
        }
        self.system.validate()?;
        self.train.validate()?;
        self.runs().map(|_| ())
    }

    /// Every run in execution order: algorithm, then axis value, then seed.
    pub fn runs(&self) -> Result<Vec<RunSpec>, HarnessError> {
        let points: Vec<(Option<f64>, SystemConfig)> = match &self.sweep {
            None => vec![(None, self.system.clone())],
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some(v), s.axis.apply(&self.system, v, s.half_width)?)))
                .collect::<Result<_, HarnessError>>()?,
        };
        let axis = self.sweep.as_ref().map(|s| s.axis);
        let mut out = Vec::new();
        for alg in &self.algorithms {
            for (value, cfg) in &points {
                for &seed in &self.seeds {
                    let point = match (axis, value) {
                        (Some(a), Some(v)) => format!("_{a}-{v}"),
                        _ => String::new(),
                    };
                    out.push(RunSpec {
                        id: format!("{}{point}_s{seed}", alg.label()),
                        algorithm: alg.label(),
                        spec: alg.spec(),
                        axis,
                        axis_value: *value,
                        seed,
                        config: cfg.clone(),
                    });
                }
            }
        }
        Ok(out)
    }
}
