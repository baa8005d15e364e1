//! Run configuration: built-in presets, an optional flat JSON config file,
//! and command-line overrides, applied in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparse_evo_core::{EvolutionPolicy, Normalization, TrainConfig};

use crate::error::{IoError, Result};

pub const PRESETS: [&str; 3] = ["default", "madelon", "micromass"];
pub const GENERATORS: [&str; 1] = ["madelon-like"];
pub const DEFAULT_CHECKPOINTS: [usize; 4] = [5, 20, 50, 100];

/// Fully resolved settings of a training run. Serialized flat, so the echoed
/// `run_config.json` is itself a valid config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub policy: EvolutionPolicy,
    pub epsilon: f64,
    pub zeta: f64,
    pub eta: f64,
    pub dropout_rate: f64,
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    pub activation_sample_cap: Option<usize>,
    /// CSV dataset; mutually exclusive with `generator`.
    pub data: Option<PathBuf>,
    pub generator: Option<String>,
    pub generator_samples: usize,
    pub data_seed: u64,
    pub label_column: String,
    pub normalize: Normalization,
    /// Exact number of test samples; takes priority over `test_fraction`.
    pub test_samples: Option<usize>,
    pub test_fraction: f64,
    pub out: PathBuf,
    pub checkpoints: Vec<usize>,
}

/// A partial configuration: every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub preset: Option<String>,
    pub policy: Option<EvolutionPolicy>,
    pub epsilon: Option<f64>,
    pub zeta: Option<f64>,
    pub eta: Option<f64>,
    pub dropout_rate: Option<f64>,
    pub hidden_dims: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub momentum: Option<f64>,
    pub seed: Option<u64>,
    pub activation_sample_cap: Option<usize>,
    pub data: Option<PathBuf>,
    pub generator: Option<String>,
    pub generator_samples: Option<usize>,
    pub data_seed: Option<u64>,
    pub label_column: Option<String>,
    pub normalize: Option<Normalization>,
    pub test_samples: Option<usize>,
    pub test_fraction: Option<f64>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let train = TrainConfig::default();
        let mut cfg = Self {
            preset: name.to_string(),
            policy: EvolutionPolicy::Set,
            epsilon: train.epsilon,
            zeta: train.zeta,
            eta: train.eta,
            dropout_rate: train.dropout_rate,
            hidden_dims: train.hidden_dims,
            epochs: train.epochs,
            batch_size: train.batch_size,
            momentum: train.momentum,
            seed: train.seed,
            activation_sample_cap: train.activation_sample_cap,
            data: None,
            generator: None,
            generator_samples: sparse_evo_core::data::MADELON_SAMPLES,
            data_seed: 0,
            label_column: crate::csv_io::DEFAULT_LABEL_COLUMN.to_string(),
            normalize: Normalization::ZScore,
            test_samples: None,
            test_fraction: 0.2,
            out: PathBuf::from("runs/default"),
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
        };
        match name {
            "default" => {}
            "madelon" => {
                cfg.eta = 0.1;
                cfg.generator = Some("madelon-like".into());
                cfg.test_samples = Some(sparse_evo_core::data::MADELON_TEST_SAMPLES);
                cfg.out = PathBuf::from("runs/madelon");
            }
            "micromass" => {
                cfg.eta = 0.1;
                cfg.out = PathBuf::from("runs/micromass");
            }
            other => {
                return Err(IoError::Config(format!(
                    "unknown preset {other:?}; expected one of {PRESETS:?}"
                )))
            }
        }
        Ok(cfg)
    }

    /// Preset defaults, then `file`, then `flags`. The preset itself is taken
    /// from the flags, else the file, else `"default"`.
    pub fn resolve(file: Option<&ConfigPatch>, flags: &ConfigPatch) -> Result<Self> {
        let name = flags
            .preset
            .as_deref()
            .or(file.and_then(|f| f.preset.as_deref()))
            .unwrap_or("default");
        let mut cfg = Self::preset(name)?;
        if let Some(f) = file {
            cfg.apply(f);
        }
        cfg.apply(flags);
        cfg.preset = name.to_string();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, patch: &ConfigPatch) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &patch.$field { self.$field = v.clone(); })*
            };
        }
        take!(
            preset, policy, epsilon, zeta, eta, dropout_rate, hidden_dims, epochs, batch_size,
            momentum, seed, generator_samples, data_seed, label_column, normalize, test_fraction,
            out, checkpoints
        );
        if patch.activation_sample_cap.is_some() {
            self.activation_sample_cap = patch.activation_sample_cap;
        }
        if patch.test_samples.is_some() {
            self.test_samples = patch.test_samples;
        }
        // a dataset source given at a higher level replaces the other kind
        if patch.data.is_some() {
            self.data = patch.data.clone();
            self.generator = None;
        }
        if patch.generator.is_some() {
            self.generator = patch.generator.clone();
            self.data = None;
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epsilon: self.epsilon,
            zeta: self.zeta,
            eta: self.eta,
            dropout_rate: self.dropout_rate,
            hidden_dims: self.hidden_dims.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            momentum: self.momentum,
            seed: self.seed,
            activation_sample_cap: self.activation_sample_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.epochs == 0 {
            return Err(IoError::Config("epochs must be at least 1".into()));
        }
        match (&self.data, &self.generator) {
            (None, None) => {
                return Err(IoError::Config(
                    "no dataset: set `data` to a CSV path or `generator` to a generator name"
                        .into(),
                ))
            }
            (_, Some(g)) if !GENERATORS.contains(&g.as_str()) => {
                return Err(IoError::Config(format!(
                    "unknown generator {g:?}; expected one of {GENERATORS:?}"
                )))
            }
            _ => {}
        }
        if self.test_samples.is_none() && !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(IoError::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.test_samples == Some(0) {
            return Err(IoError::Config("test_samples must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn read_patch(path: &Path) -> Result<ConfigPatch> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::json(path, e))
}

pub fn write_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg).map_err(|e| IoError::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn madelon_preset_values() {
        let cfg = RunConfig::preset("madelon").unwrap();
        assert_eq!(cfg.hidden_dims, vec![1000, 1000, 1000]);
        assert_eq!(cfg.epsilon, 20.0);
        assert_eq!(cfg.zeta, 0.3);
        assert_eq!(cfg.dropout_rate, 0.3);
        assert_eq!(cfg.eta, 0.1);
        assert_eq!(cfg.epochs, 100);
        assert_eq!(RunConfig::preset("default").unwrap().eta, 0.01);
        assert_eq!(RunConfig::preset("micromass").unwrap().eta, 0.1);
        assert!(RunConfig::preset("mnist").is_err());
    }

    #[test]
    fn flags_beat_file_beat_preset() {
        let file = ConfigPatch {
            preset: Some("madelon".into()),
            eta: Some(0.05),
            epochs: Some(7),
            ..Default::default()
        };
        let flags = ConfigPatch {
            epochs: Some(3),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(Some(&file), &flags).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.eta, 0.05);
        assert_eq!(cfg.dropout_rate, 0.3);
        assert_eq!(cfg.preset, "madelon");
    }

    #[test]
    fn echoed_config_reads_back_as_a_patch() {
        let cfg = RunConfig::preset("madelon").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let patch: ConfigPatch = serde_json::from_str(&text).unwrap();
        assert_eq!(RunConfig::resolve(Some(&patch), &ConfigPatch::default()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let flags = ConfigPatch {
            preset: Some("madelon".into()),
            zeta: Some(1.5),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, &flags).unwrap_err().is_usage());
        let unknown = serde_json::from_str::<ConfigPatch>(r#"{"learning_rate": 0.1}"#);
        assert!(unknown.is_err());
        let policy = serde_json::from_str::<ConfigPatch>(r#"{"policy": "NOPE"}"#);
        assert!(policy.is_err());
        assert!(RunConfig::resolve(None, &ConfigPatch::default()).is_err());
    }
}
