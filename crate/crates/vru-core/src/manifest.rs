//! Experiment manifest emission. The manifest is advisory output for an
//! external trainer; nothing here executes training.

use alloc::string::String;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::FilterName;

#[derive(Debug, Error, PartialEq)]
pub enum ManifestError {
    #[error("resolution must be positive, got {0}")]
    BadResolution(i64),
    #[error("freeze_layers must lie in [0, 10], got {0}")]
    BadFreezeLayers(i64),
    #[error("batch must be positive, got {0}")]
    BadBatch(i64),
    #[error("epochs must be positive, got {0}")]
    BadEpochs(i64),
}

/// Training-run parameters. Defaults are the final configuration used for
/// the pipeline's reference models: 640-pixel input, six frozen backbone
/// layers, batch 4, 100 epochs with patience 50, the 7-class subset, and no
/// augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub resolution: u32,
    pub freeze_layers: u32,
    pub batch: u32,
    pub epochs: u32,
    pub patience: u32,
    pub class_filter: FilterName,
    pub weights_file: Option<String>,
    pub augmentation_level: crate::augment::Level,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            resolution: 640,
            freeze_layers: 6,
            batch: 4,
            epochs: 100,
            patience: 50,
            class_filter: FilterName::SevenClass,
            weights_file: None,
            augmentation_level: crate::augment::Level::None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.resolution == 0 {
            return Err(ManifestError::BadResolution(self.resolution as i64));
        }
        if self.freeze_layers > 10 {
            return Err(ManifestError::BadFreezeLayers(self.freeze_layers as i64));
        }
        if self.batch == 0 {
            return Err(ManifestError::BadBatch(self.batch as i64));
        }
        if self.epochs == 0 {
            return Err(ManifestError::BadEpochs(self.epochs as i64));
        }
        Ok(())
    }
}

/// Validates the configuration and renders it as a JSON manifest.
pub fn emit_experiment_manifest(config: &ExperimentConfig) -> Result<String, ManifestError> {
    config.validate()?;
    Ok(serde_json::to_string_pretty(config).expect("manifest serializes"))
}
