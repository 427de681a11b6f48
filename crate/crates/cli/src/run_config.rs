use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fnoseg3d::data::SyntheticSpec;
use fnoseg3d::experiment::ExperimentConfig;
use fnoseg3d::model::{ModelConfig, Variant};
use fnoseg3d::train::{ScheduleConfig, TrainConfig};

use crate::exit::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Everything a run depends on. Loaded from one JSON file, then overridden
/// by command-line flags, then written next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub precision: Precision,
    /// Preset used when `model` is absent.
    pub variant: Variant,
    /// Laptop-scale presets instead of the full-size ones.
    pub desk: bool,
    /// Explicit architecture; overrides `variant` and `desk`.
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
    pub synthetic: SyntheticSpec,
    /// Path of a dataset `manifest.json`.
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub factors: Vec<usize>,
    pub variants: Vec<Variant>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            precision: Precision::F32,
            variant: Variant::Fnoseg3d,
            desk: true,
            model: None,
            train: TrainConfig {
                epochs: 50,
                schedule: ScheduleConfig {
                    total_epochs: 50,
                    ..ScheduleConfig::default()
                },
                ..TrainConfig::default()
            },
            synthetic: SyntheticSpec::default(),
            manifest: None,
            out: PathBuf::from("runs/default"),
            factors: vec![1, 2],
            variants: Variant::ALL.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model_config(&self) -> ModelConfig {
        let c = match &self.model {
            Some(m) => m.clone(),
            None if self.desk => self.variant.config().desk(),
            None => self.variant.config(),
        };
        c.with_seed(self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            factors: self.factors.clone(),
            variants: self.variants.clone(),
            desk: self.desk,
            train: self.train_config(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: fnoseg3d::Error| CliError::Config(e.to_string());
        self.model_config().validate().map_err(cfg)?;
        self.train_config().validate().map_err(cfg)?;
        self.synthetic.validate().map_err(cfg)?;
        if self.factors.is_empty() || self.factors.contains(&0) {
            return Err(CliError::Config(
                "factors must be a non-empty list of integers >= 1".into(),
            ));
        }
        if self.variants.is_empty() {
            return Err(CliError::Config("variants must not be empty".into()));
        }
        Ok(())
    }

    /// Writes the resolved configuration into the output directory.
    pub fn record(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("run_config.json"),
            fnoseg3d::canonical::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}
