//! JSON checkpoints. Floats are written with shortest round-trip formatting,
//! so a save/load cycle reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelDims, ModelParams, PARAM_ORDER};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "pcgseg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    len: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: ModelDims,
    pub model: ModelConfig,
    /// Anything the caller needs to rebuild the input pipeline (feature
    /// spec, normalisation statistics, decode settings).
    #[serde(default)]
    pub metadata: serde_json::Value,
    params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, model: ModelConfig, metadata: serde_json::Value) -> Self {
        let arrays = PARAM_ORDER
            .iter()
            .zip(params.arrays())
            .map(|(name, a)| NamedArray {
                name: (*name).to_string(),
                len: a.len(),
                values: a.to_vec(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dims: params.dims,
            model,
            metadata,
            params: arrays,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.dims
            .validate(self.model.pooling)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut p = ModelParams::zeros(self.dims);
        if self.params.len() != PARAM_ORDER.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                PARAM_ORDER.len(),
                self.params.len()
            )));
        }
        for ((dst, src), name) in p.arrays_mut().into_iter().zip(&self.params).zip(PARAM_ORDER) {
            if src.name != name {
                return Err(Error::Checkpoint(format!(
                    "expected array `{name}`, found `{}`",
                    src.name
                )));
            }
            if src.values.len() != dst.len() || src.len != dst.len() {
                return Err(Error::Checkpoint(format!(
                    "array `{name}` has {} values, dims require {}",
                    src.values.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&src.values);
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (this build reads {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
