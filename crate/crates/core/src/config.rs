//! Run configuration. Every field has a default, so a config file only needs
//! the values it overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accelmodel::{ResourceBudget, UnrollConfig};
use crate::adam::AdamHyper;
use crate::dims::ModelDims;
use crate::error::{Error, Result};
use crate::pipeline::ExecutionMode;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    pub epochs: usize,
    pub seed: u64,
    pub mode: ExecutionMode,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub dims: ModelDims,
    pub adam: AdamHyper,
    pub budget: ResourceBudget,
    pub unroll: UnrollConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: None,
            epochs: 1,
            seed: 0,
            mode: ExecutionMode::default(),
            checkpoint: None,
            report: None,
            csv: None,
            dims: ModelDims::default(),
            adam: AdamHyper::default(),
            budget: ResourceBudget::default(),
            unroll: UnrollConfig::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.adam.validate()?;
        self.budget.validate()?;
        self.unroll.validate()?;
        Ok(())
    }

    pub fn data_dir(&self) -> Result<&Path> {
        let dir = self
            .data_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no data directory given".into()))?;
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "data directory {} does not exist",
                dir.display()
            )));
        }
        Ok(dir)
    }
}
