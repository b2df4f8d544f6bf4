use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("partition point {point} out of range for model {model} with {layers} layers")]
    PartitionOutOfRange {
        model: usize,
        point: usize,
        layers: usize,
    },
    #[error("model {model}{}: {reason}", layer.map(|l| format!(" layer {l}")).unwrap_or_default())]
    Invariant {
        model: usize,
        layer: Option<usize>,
        reason: String,
    },
    #[error("catalog parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("{link} rate is zero but {volume} bits must cross it")]
    InfeasibleLink { link: &'static str, volume: f64 },
    #[error("{resource} capacity is zero but {work} FLOPs are assigned to it")]
    NoCapacity { resource: &'static str, work: f64 },
    #[error("per-user cost lists must be non-empty and equally long ({energy} vs {privacy})")]
    BadLengths { energy: usize, privacy: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Catalog(#[from] ProfileError),
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("catalog has {catalog} models but config expects {config}")]
    CatalogMismatch { catalog: usize, config: usize },
    #[error("deployment on server {server} needs {needed} bytes but only {capacity} are available")]
    StorageOverflow {
        server: usize,
        needed: u64,
        capacity: u64,
    },
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("deployment is due at slot {0} before stepping")]
    DeploymentDue(usize),
    #[error("deployment only happens on interval boundaries (slot {0})")]
    NotDeploymentSlot(usize),
    #[error("episode finished after {0} slots")]
    EpisodeOver(usize),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Cost(#[from] CostError),
}
