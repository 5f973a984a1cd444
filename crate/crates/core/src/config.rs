//! Harness configuration: one JSON document, strictly parsed, every field
//! defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::MfccConfig;
use crate::device::{SynapseParams, VolatileDeviceParams};
use crate::energy::EnergyConfig;
use crate::error::{Error, Result};
use crate::readout::{Loss, TrainConfig, TrainMode};
use crate::reservoir::ReservoirConfig;
use crate::sclc::Thresholds;
use crate::seed::SeedTree;
use crate::tasks::{FsddConfig, TimeSeriesConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirSection {
    pub speech: ReservoirConfig,
    pub timeseries: ReservoirConfig,
}

impl Default for ReservoirSection {
    fn default() -> Self {
        Self {
            speech: ReservoirConfig::speech(),
            timeseries: ReservoirConfig::timeseries(),
        }
    }
}

/// Training knobs for one task; loss and seed are fixed by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub mode: TrainMode,
    pub noise_enabled: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            mode: TrainMode::Offline,
            noise_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSections {
    pub speech: TrainingSection,
    pub timeseries: TrainingSection,
}

impl Default for TrainingSections {
    fn default() -> Self {
        Self {
            speech: TrainingSection {
                epochs: 200,
                ..TrainingSection::default()
            },
            timeseries: TrainingSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSections {
    pub fsdd: FsddConfig,
    pub timeseries: TimeSeriesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SclcSection {
    pub thresholds: Thresholds,
    pub max_breakpoints: usize,
}

impl Default for SclcSection {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            max_breakpoints: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub device: VolatileDeviceParams<f64>,
    pub synapse: SynapseParams<f64>,
    pub reservoir: ReservoirSection,
    pub features: MfccConfig,
    pub training: TrainingSections,
    pub tasks: TaskSections,
    pub energy: EnergyConfig,
    pub sclc: SclcSection,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            device: VolatileDeviceParams::default(),
            synapse: SynapseParams::default(),
            reservoir: ReservoirSection::default(),
            features: MfccConfig::default(),
            training: TrainingSections::default(),
            tasks: TaskSections::default(),
            energy: EnergyConfig::default(),
            sclc: SclcSection::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.synapse.validate()?;
        self.reservoir.speech.validate()?;
        self.reservoir.timeseries.validate()?;
        self.features.validate()?;
        self.tasks.timeseries.validate()
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config always serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }

    fn train_config(&self, section: &TrainingSection, loss: Loss, stream: &str) -> TrainConfig<f64> {
        TrainConfig {
            epochs: section.epochs,
            batch_size: section.batch_size,
            mode: section.mode,
            loss,
            noise_enabled: section.noise_enabled,
            seed: self.seeds().derive(stream),
            synapse: self.synapse,
        }
    }

    pub fn speech_train(&self) -> TrainConfig<f64> {
        self.train_config(&self.training.speech, Loss::CrossEntropy, "train/speech")
    }

    pub fn timeseries_train(&self) -> TrainConfig<f64> {
        self.train_config(&self.training.timeseries, Loss::Mse, "train/timeseries")
    }

    pub fn fsdd_experiment(&self) -> FsddConfig {
        FsddConfig {
            mfcc: self.features.clone(),
            seed: self.seed,
            ..self.tasks.fsdd.clone()
        }
    }

    pub fn timeseries_experiment(&self) -> TimeSeriesConfig {
        TimeSeriesConfig {
            seed: self.seed,
            ..self.tasks.timeseries.clone()
        }
    }
}

pub fn load_config(path: &Path) -> Result<HarnessConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = HarnessConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    cfg.validate()?;
    Ok(cfg)
}
