//! Run configuration. A TOML file is the single source of truth; the
//! `VRFATIGUE_CACHE_DIR` / `VRFATIGUE_RESULTS_DIR` environment variables
//! override the directory keys, and CLI flags override individual keys on
//! top of that. The fully resolved configuration is embedded in run outputs
//! for provenance.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::ingest::Task;
use crate::nn::ModelKind;
use crate::preprocess::{Dtype, WINDOW_DURATIONS_S};
use crate::train::TrainConfig;

pub const CACHE_DIR_ENV: &str = "VRFATIGUE_CACHE_DIR";
pub const RESULTS_DIR_ENV: &str = "VRFATIGUE_RESULTS_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config `{path}`: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which grid cells to run. Defaults to the full 5 × 6 × 4 grid; restricting
/// any axis shrinks the run without changing the config hash, so a full run
/// can resume cells completed by earlier restricted runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSelect {
    pub tasks: Vec<Task>,
    pub models: Vec<ModelKind>,
    pub durations_s: Vec<u32>,
}

impl Default for GridSelect {
    fn default() -> Self {
        GridSelect {
            tasks: Task::ALL.to_vec(),
            models: ModelKind::ALL.to_vec(),
            durations_s: WINDOW_DURATIONS_S.to_vec(),
        }
    }
}

impl GridSelect {
    pub fn n_cells(&self) -> usize {
        self.tasks.len() * self.models.len() * self.durations_s.len()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() || self.models.is_empty() || self.durations_s.is_empty() {
            return Err(ConfigError::Invalid("empty grid axis".into()));
        }
        for d in &self.durations_s {
            if !WINDOW_DURATIONS_S.contains(d) {
                return Err(ConfigError::Invalid(format!(
                    "window duration {d} s not one of {WINDOW_DURATIONS_S:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Directory of per-recording gaze CSVs.
    pub data_dir: PathBuf,
    /// Participant metadata CSV.
    pub meta_path: PathBuf,
    /// Window-cache directory.
    pub cache_dir: PathBuf,
    /// Grid results, manifest, and report output directory.
    pub results_dir: PathBuf,
    /// On-disk payload precision for caches and checkpoints. All arithmetic
    /// is f64 regardless.
    pub dtype: Dtype,
    /// Train-eval worker threads for grid cells; 0 = one per available core.
    /// Execution detail only — results are identical for any worker count.
    pub workers: usize,
    pub train: TrainConfig,
    pub grid: GridSelect,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            meta_path: PathBuf::from("data/metadata.csv"),
            cache_dir: PathBuf::from("cache"),
            results_dir: PathBuf::from("results"),
            dtype: Dtype::F64,
            workers: 0,
            train: TrainConfig::default(),
            grid: GridSelect::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.grid.validate()
    }

    /// Worker threads to actually spawn: the configured count, or one per
    /// available core when 0.
    pub fn effective_workers(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map(usize::from).unwrap_or(1)
        }
    }

    /// Hex SHA-256 over the result-determining subset of the configuration:
    /// training hyperparameters, channel assembly, seed, and dtype. Paths and
    /// the grid cell selection are excluded, so a restricted rerun shares the
    /// hash of the full run and can resume its manifest.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Semantic<'a> {
            train: &'a TrainConfig,
            dtype: Dtype,
        }
        let canon = serde_json::to_vec(&Semantic { train: &self.train, dtype: self.dtype })
            .expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canon);
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads a TOML config and applies environment-variable directory overrides.
/// Missing keys take their defaults, so `{}`-style minimal files are valid.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml {
        path: path.display().to_string(),
        source,
    })?;
    apply_env_overrides(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

pub fn apply_env_overrides(cfg: &mut RunConfig) {
    if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
        if !dir.is_empty() {
            cfg.cache_dir = PathBuf::from(dir);
        }
    }
    if let Ok(dir) = std::env::var(RESULTS_DIR_ENV) {
        if !dir.is_empty() {
            cfg.results_dir = PathBuf::from(dir);
        }
    }
}
