//! Run configuration, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::enhancer::EnhancerKind;
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::io::{Encoding, WriteOptions};
use crate::pipeline::{OutputFormat, PipelineConfig, PipelineMode};
use crate::stft::{StftConfig, DEFAULT_BAND_EDGES_HZ};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandsConfig {
    pub edges_hz: Vec<f64>,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self {
            edges_hz: DEFAULT_BAND_EDGES_HZ.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub limiter: bool,
    pub encoding: Encoding,
    /// Saturate out-of-range samples on write instead of failing.
    pub clip: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub mode: PipelineMode,
    pub stft: StftConfig,
    pub bands: BandsConfig,
    pub estimator: EstimatorConfig,
    pub enhancer: EnhancerKind,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline().validate()?;
        self.enhancer.build()?;
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            stft: self.stft.clone(),
            band_edges_hz: self.bands.edges_hz.clone(),
            estimator: self.estimator.clone(),
            mode: self.mode,
            output: self.output.format,
            limiter: self.output.limiter,
        }
    }

    pub fn write_options(&self) -> WriteOptions {
        WriteOptions {
            encoding: self.output.encoding,
            clip: self.output.clip,
        }
    }
}
