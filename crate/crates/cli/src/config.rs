//! Versioned experiment configuration consumed by `train` and `sweep`.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;
/// Largest meaningful error level in percent, `100 sin(pi/4) / 2`.
pub const MAX_LEVEL_PERCENT: f64 = 35.35533905932738;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    /// Side of the retained Fourier square; the mesh has `s*s` ports.
    pub fourier_side: usize,
    /// Optional caps on the number of samples used.
    #[serde(default)]
    pub train_limit: Option<usize>,
    #[serde(default)]
    pub test_limit: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScheduleConfig {
    /// Train a maximally faulty model per (seed, level).
    Direct { epochs: usize },
    /// Ideal training followed by incremental re-training at each level.
    Transfer {
        initial_epochs: usize,
        epochs_per_step: usize,
    },
    /// Ideal-trained phases copied raw into random faulty meshes.
    Uncorrected { epochs: usize },
    /// Ideal-trained phases forward-corrected into random faulty meshes.
    Corrected { epochs: usize },
    /// Trained phases programmed into random lossy meshes; levels are
    /// interpreted as integer loss levels `k` instead of percents.
    Lossy {
        epochs: usize,
        /// Error level percent of the trained model (0 = ideal).
        base_level_percent: f64,
    },
}

impl ScheduleConfig {
    pub fn phase_tag(&self) -> &'static str {
        match self {
            ScheduleConfig::Direct { .. } => "direct",
            ScheduleConfig::Transfer { .. } => "transfer",
            ScheduleConfig::Uncorrected { .. } => "uncorrected",
            ScheduleConfig::Corrected { .. } => "corrected",
            ScheduleConfig::Lossy { .. } => "lossy",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub task: TaskConfig,
    /// Mesh layers in the network.
    pub layers: usize,
    pub schedule: ScheduleConfig,
    /// Error levels in percent (or loss levels `k` for the lossy mode).
    pub levels_percent: Vec<f64>,
    /// Error/loss draws per (seed, level).
    pub trials: usize,
    /// Model seeds; one independently trained model per seed.
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        for path in [
            &self.task.train_images,
            &self.task.train_labels,
            &self.task.test_images,
            &self.task.test_labels,
        ] {
            if !path.exists() {
                return Err(CliError::config(format!(
                    "referenced file does not exist: {}",
                    path.display()
                )));
            }
        }
        let s = self.task.fourier_side;
        if s == 0 || s % 2 != 0 {
            return Err(CliError::config(format!(
                "fourier_side must be a positive even number, got {s}"
            )));
        }
        if self.layers == 0 {
            return Err(CliError::config("layers must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("at least one seed is required".into()));
        }
        if self.levels_percent.is_empty() {
            return Err(CliError::config("at least one level is required".into()));
        }
        let lossy = matches!(self.schedule, ScheduleConfig::Lossy { .. });
        for &level in &self.levels_percent {
            if lossy {
                if level < 0.0 || level.fract() != 0.0 {
                    return Err(CliError::config(format!(
                        "lossy levels must be non-negative integers, got {level}"
                    )));
                }
            } else if !(0.0..=MAX_LEVEL_PERCENT + 1e-9).contains(&level) {
                return Err(CliError::config(format!(
                    "error level {level}% outside [0, {MAX_LEVEL_PERCENT:.2}]"
                )));
            }
        }
        if let ScheduleConfig::Lossy { base_level_percent, .. } = self.schedule {
            if !(0.0..=MAX_LEVEL_PERCENT + 1e-9).contains(&base_level_percent) {
                return Err(CliError::config(format!(
                    "base level {base_level_percent}% outside [0, {MAX_LEVEL_PERCENT:.2}]"
                )));
            }
        }
        if self.trials == 0 {
            return Err(CliError::config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Loads a config file; a sweep manifest (with an embedded `config`
    /// object) is accepted for byte-exact re-runs.
    pub fn load(path: &Path) -> Result<(Self, serde_json::Value), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("bad JSON in {}: {e}", path.display())))?;
        let config_value = match value.get("config") {
            Some(inner) if value.get("config_hash").is_some() => inner.clone(),
            _ => value,
        };
        let config: ExperimentConfig = serde_json::from_value(config_value.clone())
            .map_err(|e| CliError::config(format!("bad config in {}: {e}", path.display())))?;
        config.validate()?;
        Ok((config, config_value))
    }
}
