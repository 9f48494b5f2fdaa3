//! Recordings, annotations and where they come from.
//!
//! A [`PcgRecording`] can only be built through [`PcgRecording::new`], which
//! checks the sample range and the annotation layout, so every value of the
//! type in circulation is valid.

mod annotations;
mod split;
mod synth;
mod wav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotations::{intervals_from_states, load_annotations, parse_annotations, write_annotations};
pub use split::split_dataset;
pub use synth::{synth_pcg, synth_pcg_parts, SynthConfig, SynthOutput};
pub use wav::{load_wav, write_wav};

/// Loads every `*.wav` in `dir` (sorted by name), attaching `<stem>.csv`
/// annotations where present.
pub fn load_dir(dir: impl AsRef<std::path::Path>) -> Result<Vec<PcgRecording>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut wavs: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        return Err(Error::EmptyDataset(dir.to_path_buf()));
    }
    wavs.iter()
        .map(|w| {
            let rec = load_wav(w)?;
            let ann = w.with_extension("csv");
            if ann.is_file() {
                load_annotations(&ann, &rec)
            } else {
                Ok(rec)
            }
        })
        .collect()
}

/// Annotated cardiac state of a stretch of samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeartState {
    S1,
    Systole,
    S2,
    Diastole,
    None,
}

impl HeartState {
    pub const ALL: [HeartState; 5] = [
        HeartState::S1,
        HeartState::Systole,
        HeartState::S2,
        HeartState::Diastole,
        HeartState::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeartState::S1 => "S1",
            HeartState::Systole => "Systole",
            HeartState::S2 => "S2",
            HeartState::Diastole => "Diastole",
            HeartState::None => "None",
        }
    }
}

impl fmt::Display for HeartState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeartState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeartState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown state token `{s}`"))
    }
}

/// Half-open sample interval `[start_sample, end_sample)` carrying one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInterval {
    pub start_sample: usize,
    pub end_sample: usize,
    pub state: HeartState,
}

impl StateInterval {
    pub fn new(start_sample: usize, end_sample: usize, state: HeartState) -> Result<Self> {
        if start_sample >= end_sample {
            return Err(Error::invalid(
                "interval",
                format!("start ≥ end ({start_sample} ≥ {end_sample})"),
            ));
        }
        Ok(StateInterval {
            start_sample,
            end_sample,
            state,
        })
    }

    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, sample: usize) -> bool {
        sample >= self.start_sample && sample < self.end_sample
    }
}

/// Mono heart-sound recording with its ground-truth intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct PcgRecording {
    id: String,
    samples: Vec<f64>,
    sample_rate_hz: u32,
    annotations: Vec<StateInterval>,
}

impl PcgRecording {
    /// Builds a recording, sorting the annotations and rejecting anything
    /// that violates the sample range or interval layout.
    pub fn new(
        id: impl Into<String>,
        samples: Vec<f64>,
        sample_rate_hz: u32,
        mut annotations: Vec<StateInterval>,
    ) -> Result<Self> {
        let id = id.into();
        let bad = |reason: String| Error::InvalidRecording { id: id.clone(), reason };
        if sample_rate_hz == 0 {
            return Err(bad("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || *s < -1.0 || *s > 1.0) {
            return Err(bad(format!("sample {i} = {} outside [-1, 1]", samples[i])));
        }
        annotations.sort_by_key(|a| (a.start_sample, a.end_sample));
        for a in &annotations {
            if a.start_sample >= a.end_sample {
                return Err(bad(format!(
                    "interval start ≥ end ({} ≥ {})",
                    a.start_sample, a.end_sample
                )));
            }
            if a.end_sample > samples.len() {
                return Err(bad(format!(
                    "interval end {} beyond signal length {}",
                    a.end_sample,
                    samples.len()
                )));
            }
        }
        for pair in annotations.windows(2) {
            if pair[1].start_sample < pair[0].end_sample {
                return Err(bad(format!(
                    "intervals overlap: [{}, {}) and [{}, {})",
                    pair[0].start_sample, pair[0].end_sample, pair[1].start_sample, pair[1].end_sample
                )));
            }
        }
        Ok(PcgRecording {
            id,
            samples,
            sample_rate_hz,
            annotations,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn annotations(&self) -> &[StateInterval] {
        &self.annotations
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Same recording with a different annotation set.
    pub fn with_annotations(&self, annotations: Vec<StateInterval>) -> Result<Self> {
        PcgRecording::new(self.id.clone(), self.samples.clone(), self.sample_rate_hz, annotations)
    }

    /// Same annotations over new samples (e.g. a noisy copy). Values are
    /// clamped into [-1, 1].
    pub fn with_samples(&self, id: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        PcgRecording::new(id, samples, self.sample_rate_hz, self.annotations.clone())
    }

    /// State at a sample; unannotated samples are `None`.
    pub fn state_at(&self, sample: usize) -> HeartState {
        let idx = self.annotations.partition_point(|a| a.start_sample <= sample);
        if idx == 0 {
            return HeartState::None;
        }
        let a = &self.annotations[idx - 1];
        if a.contains(sample) {
            a.state
        } else {
            HeartState::None
        }
    }

    pub fn count_state(&self, state: HeartState) -> usize {
        self.annotations.iter().filter(|a| a.state == state).count()
    }
}
