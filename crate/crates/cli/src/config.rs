//! Training configuration: JSON file, flag overrides and seed resolution.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use bans_core::model::{DEFAULT_EMBED, DEFAULT_HIDDEN};
use bans_core::train::{OptimizerKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, Failure};

/// Environment variable supplying the seed when `--seed` is absent.
pub const SEED_ENV: &str = "BANS_SEED";

/// Every key is optional; anything not listed here is rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub clip_norm: Option<f64>,
    pub seed: Option<u64>,
    pub patience: Option<usize>,
    pub optimizer: Option<OptimizerKind>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub embed: Option<usize>,
    pub hidden: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(Failure::usage)?;
        Self::parse(&text).map_err(|e| Failure::usage(e.context(format!("config {}", path.display()))))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fields set in `overrides` win.
    pub fn merge(self, overrides: FileConfig) -> FileConfig {
        macro_rules! pick {
            ($($f:ident),*) => {
                FileConfig { $($f: overrides.$f.or(self.$f)),* }
            };
        }
        pick!(learning_rate, epochs, batch_size, clip_norm, seed, patience, optimizer, beta1, beta2, epsilon, embed, hidden)
    }
}

/// The resolved view a training run actually uses; written next to the
/// checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub embed: usize,
    pub hidden: usize,
}

/// Flag, then file, then environment, then the library default.
pub fn resolve_seed(explicit: Option<u64>, env: Option<&str>) -> CliResult<u64> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match env {
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| Failure::usage(anyhow!("{SEED_ENV}={raw:?} is not an unsigned integer"))),
        None => Ok(TrainConfig::default().seed),
    }
}

pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

impl RunConfig {
    pub fn resolve(file: FileConfig, env: Option<&str>) -> CliResult<Self> {
        let d = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: file.learning_rate.unwrap_or(d.learning_rate),
            epochs: file.epochs.unwrap_or(d.epochs),
            batch_size: file.batch_size.unwrap_or(d.batch_size),
            clip_norm: file.clip_norm.unwrap_or(d.clip_norm),
            seed: resolve_seed(file.seed, env)?,
            patience: file.patience.unwrap_or(d.patience),
            optimizer: file.optimizer.unwrap_or(d.optimizer),
            beta1: file.beta1.unwrap_or(d.beta1),
            beta2: file.beta2.unwrap_or(d.beta2),
            epsilon: file.epsilon.unwrap_or(d.epsilon),
        };
        train.validate()?;
        let embed = file.embed.unwrap_or(DEFAULT_EMBED);
        let hidden = file.hidden.unwrap_or(DEFAULT_HIDDEN);
        if embed == 0 || hidden == 0 {
            return Err(Failure::usage(anyhow!("embed and hidden must be positive")));
        }
        Ok(Self { train, embed, hidden })
    }
}
