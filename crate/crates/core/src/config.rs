//! One TOML document holding every setting of a run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::model::{HeadActivation, ModelConfig, ModelDims, Pooling};
use crate::training::TrainConfig;

/// The synthetic corpus used when no recordings are supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSetConfig {
    pub n_recordings: usize,
    pub duration_s: f64,
    pub bpm_min: f64,
    pub bpm_max: f64,
    /// Recording noise; `inf` for clean recordings.
    pub snr_db: f64,
    pub sample_rate_hz: u32,
}

impl Default for SyntheticSetConfig {
    fn default() -> Self {
        SyntheticSetConfig {
            n_recordings: 40,
            duration_s: 20.0,
            bpm_min: 50.0,
            bpm_max: 120.0,
            snr_db: 15.0,
            sample_rate_hz: 1600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub synthetic: SyntheticSetConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_fraction: 0.7,
            val_fraction: 0.15,
            test_fraction: 0.15,
            synthetic: SyntheticSetConfig::default(),
        }
    }
}

impl DataConfig {
    pub fn ratios(&self) -> (f64, f64, f64) {
        (self.train_fraction, self.val_fraction, self.test_fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub win_ms: f64,
    pub shift_ms: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            win_ms: 80.0,
            shift_ms: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: usize,
    /// Attention projection width; 0 selects `2 · hidden_dim`.
    pub attn_dim: usize,
    /// Frames per window (odd).
    pub window_frames: usize,
    pub head: HeadActivation,
    pub pooling: Pooling,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden_dim: 80,
            attn_dim: 0,
            window_frames: 7,
            head: HeadActivation::Linear,
            pooling: Pooling::Attention,
        }
    }
}

impl ModelSection {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            head: self.head,
            pooling: self.pooling,
        }
    }

    pub fn dims(&self, input_dim: usize) -> ModelDims {
        let attn_dim = match (self.pooling, self.attn_dim) {
            (Pooling::Mean, _) => 0,
            (Pooling::Attention, 0) => 2 * self.hidden_dim,
            (Pooling::Attention, a) => a,
        };
        ModelDims {
            input_dim,
            hidden_dim: self.hidden_dim,
            attn_dim,
            seq_len: self.window_frames,
        }
    }
}

/// Named presets for [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Every setting at its default value; each epoch visits every
    /// training window.
    Full,
    /// Same schedule, but each epoch samples a fixed number of training
    /// windows and scores a fixed validation subset, which keeps one
    /// training run within a few minutes on a single core.
    Quick,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "quick" => Ok(Profile::Quick),
            _ => Err(Error::invalid(
                "profile",
                format!("expected `full` or `quick`, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; data generation, splitting, initialisation, batching
    /// and noise draw from independent streams derived from it.
    pub seed: u64,
    pub data: DataConfig,
    pub frames: FrameConfig,
    pub features: FeatureSpec,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        let mut c = RunConfig::default();
        if profile == Profile::Quick {
            c.model.hidden_dim = 40;
            c.train.windows_per_epoch = 1024;
            c.train.val_max_windows = 1024;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        self.decode.validate()?;
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.val_fraction > 0.0 && d.test_fraction > 0.0) {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if ((d.train_fraction + d.val_fraction + d.test_fraction) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        let s = &d.synthetic;
        if !(s.bpm_min <= s.bpm_max && s.duration_s > 0.0) {
            return Err(Error::Config(
                "synthetic: need bpm_min ≤ bpm_max and a positive duration".into(),
            ));
        }
        if !(self.frames.win_ms > 0.0 && self.frames.shift_ms > 0.0) {
            return Err(Error::Config("frame window and shift must be positive".into()));
        }
        let k = self.model.window_frames;
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::Config(format!("model.window_frames must be odd, got {k}")));
        }
        self.model
            .dims(self.features.dim())
            .validate(self.model.pooling)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_load_dump_is_stable() {
        for p in [Profile::Full, Profile::Quick] {
            let text = RunConfig::profile(p).to_toml().unwrap();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, RunConfig::profile(p));
            assert_eq!(back.to_toml().unwrap(), text);
        }
        let mut c = RunConfig::default();
        c.train.noise_snr_db = f64::INFINITY;
        c.train.clip_norm = f64::INFINITY;
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap().to_toml().unwrap(), text);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = RunConfig::from_toml("seed = 3\n[model]\nhidden_dim = 20\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.model.hidden_dim, 20);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.frames, FrameConfig::default());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::from_toml("bogus = 1\n"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[train]\nlearning_rate = 1\n").is_err());
        assert!(RunConfig::from_toml("[model]\nwindow_frames = 6\n").is_err());
        assert!(RunConfig::from_toml("[data]\ntrain_fraction = 0.9\n").is_err());
        assert!(RunConfig::from_toml("[features]\ncomponents = [\"MFCC\", \"MFCC\"]\n").is_err());
    }

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = RunConfig::default();
        assert_eq!((c.frames.win_ms, c.frames.shift_ms), (80.0, 20.0));
        assert_eq!(c.model.dims(18), ModelDims::new(18, 80, 7));
        assert_eq!(c.model.dims(18).param_count(), 89_441);
        assert_eq!(
            (c.train.batch_size, c.train.lr_phase1, c.train.epochs_phase1),
            (32, 0.002, 30)
        );
        assert_eq!((c.train.lr_phase2, c.train.epochs_phase2), (0.0002, 70));
        assert_eq!(c.features.dim(), 18);
    }
}
