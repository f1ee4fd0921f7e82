//! Effective configuration and its stable digest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fixation::FixationParams;
use crate::ingest::ScreenGeometry;
use crate::metrics::MetricParams;
use crate::saliency::SaliencyParams;

/// Environment variable consulted when no `--config` flag is given.
pub const CONFIG_ENV: &str = "GAZEVAL_CONFIG";

/// Every tunable of the pipeline. Missing sections take their defaults;
/// unknown fields are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub geometry: ScreenGeometry,
    pub fixation: FixationParams,
    pub saliency: SaliencyParams,
    pub metrics: MetricParams,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.fixation.validate()?;
        self.saliency.validate()?;
        self.metrics.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn params_hash(&self) -> String {
        params_hash(self)
    }
}

/// First 16 hex digits of the SHA-256 of the value's JSON serialization.
///
/// Struct fields serialize in declaration order, so the digest is stable for
/// a given value.
pub fn params_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("parameters serialize");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}
