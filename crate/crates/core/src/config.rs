//! Experiment configuration, read from one TOML file.
//!
//! ```toml
//! seed = 7
//!
//! [generator]
//! num_groups = 3
//! shift_scale = 8.0
//!
//! [pipeline]
//! top_k = 10
//!
//! [[pipeline.experts]]
//! family = "nearest_centroid"
//! seed = 0
//!
//! [ablation]
//! seeds = 20
//! ```
//!
//! Every section and key is optional; see the `Default` impls for values.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::SyntheticConfig;
use crate::error::{Error, Result};
use crate::experts::ExpertSpec;
use crate::progressive::RunConfig;

/// Validation share used by the ablations: 200 of 1332 training samples.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 200.0 / 1332.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Number of repetitions; repetition `i` uses seed `seed + i`.
    pub seeds: usize,
    pub validation_fraction: f64,
    /// Allocate the validation draw per class instead of uniformly.
    pub stratified: bool,
    /// Generate a fresh synthetic dataset per repetition (ignored when a data
    /// directory is given).
    pub regenerate: bool,
    /// Expert counts for the expert-count ablation.
    pub expert_counts: Vec<usize>,
    /// Experts drawn in order for the expert-count ablation.
    pub expert_pool: Vec<ExpertSpec>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seeds: 20,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            stratified: false,
            regenerate: true,
            expert_counts: vec![1, 2, 3, 4, 5],
            expert_pool: ExpertSpec::default_ensemble(5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub generator: SyntheticConfig,
    pub pipeline: RunConfig,
    pub ablation: AblationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            generator: SyntheticConfig::default(),
            pipeline: RunConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.pipeline.validate()?;
        let a = &self.ablation;
        if a.seeds == 0 {
            return Err(Error::Config("ablation.seeds must be >= 1".into()));
        }
        if !(a.validation_fraction > 0.0 && a.validation_fraction < 1.0) {
            return Err(Error::Config("ablation.validation_fraction must be in (0, 1)".into()));
        }
        if a.expert_counts.is_empty() || a.expert_counts.iter().any(|&e| e == 0 || e > a.expert_pool.len()) {
            return Err(Error::Config(format!(
                "ablation.expert_counts must lie in 1..={}",
                a.expert_pool.len()
            )));
        }
        a.expert_pool.iter().try_for_each(ExpertSpec::validate)
    }

    /// The pipeline settings with the top-level seed applied.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            ..self.pipeline.clone()
        }
    }

    /// SHA-256 over the canonical JSON form of the config.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes to JSON");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
