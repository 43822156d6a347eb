//! Run configuration, stored as TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_DIST_THRESH;
use crate::infer::InferenceConfig;
use crate::mapper::MapperConfig;
use crate::sogmm::SogmmConfig;
use crate::spatialhash::HashGridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    /// Keep every n-th pixel in each image axis.
    pub decimation: u32,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self { decimation: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Precision and recall distance, meters.
    pub dist_thresh: f64,
    /// Voxel size of the ground-truth filter, meters.
    pub gt_voxel: f64,
    /// Pixel decimation used when building ground truth.
    pub gt_decimation: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            dist_thresh: DEFAULT_DIST_THRESH,
            gt_voxel: 0.01,
            gt_decimation: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sogmm: SogmmConfig,
    pub mapper: MapperConfig,
    pub hash: HashGridSpec,
    pub inference: InferenceConfig,
    pub load: LoadConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.sogmm.validate()?;
        self.mapper.validate()?;
        self.hash.validate()?;
        self.inference.validate()?;
        if self.load.decimation < 1 || self.eval.gt_decimation < 1 {
            return Err(Error::InvalidConfig("decimation must be at least 1".into()));
        }
        if !(self.eval.dist_thresh > 0.0 && self.eval.gt_voxel > 0.0) {
            return Err(Error::InvalidConfig("eval distances must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}
