//! Synthetic phonocardiograms with exactly known state boundaries.
//!
//! Each cardiac cycle contains an S1 burst at the cycle start and an S2 burst
//! at `systole_fraction` of the cycle. Both are exponentially damped
//! sinusoids. Per-beat amplitude and pitch are jittered from a seeded RNG so
//! that recordings are not trivially periodic.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{HeartState, PcgRecording, StateInterval};
use crate::error::{Error, Result};

pub const MIN_BPM: f64 = 24.0;
pub const MAX_BPM: f64 = 315.0;

/// Peak absolute amplitude of the generated signal.
const PEAK: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub bpm: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub s1_center_hz: f64,
    pub s2_center_hz: f64,
    pub s1_dur_ms: f64,
    pub s2_dur_ms: f64,
    /// S2 onset as a fraction of the cycle length.
    pub systole_fraction: f64,
    /// Additive white Gaussian noise at this SNR; `None` for a clean signal.
    pub noise_snr_db: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            bpm: 60.0,
            duration_s: 20.0,
            sample_rate_hz: 1600,
            s1_center_hz: 120.0,
            s2_center_hz: 180.0,
            s1_dur_ms: 100.0,
            s2_dur_ms: 80.0,
            systole_fraction: 0.3,
            noise_snr_db: None,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_BPM..=MAX_BPM).contains(&self.bpm) {
            return Err(Error::invalid(
                "bpm",
                format!("{} outside [{MIN_BPM}, {MAX_BPM}]", self.bpm),
            ));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s", "must be positive"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::invalid("sample_rate_hz", "must be positive"));
        }
        let nyq = self.sample_rate_hz as f64 / 2.0;
        for (name, f) in [("s1_center_hz", self.s1_center_hz), ("s2_center_hz", self.s2_center_hz)] {
            if !(f > 0.0 && f < nyq) {
                return Err(Error::invalid(name, format!("{f} Hz not in (0, {nyq})")));
            }
        }
        if !(self.s1_dur_ms > 0.0 && self.s2_dur_ms > 0.0) {
            return Err(Error::invalid("s1_dur_ms/s2_dur_ms", "must be positive"));
        }
        if !(self.systole_fraction > 0.0 && self.systole_fraction < 1.0) {
            return Err(Error::invalid("systole_fraction", "must lie in (0, 1)"));
        }
        let cycle_ms = 60_000.0 / self.bpm;
        let s2_onset_ms = self.systole_fraction * cycle_ms;
        if self.s1_dur_ms > s2_onset_ms {
            return Err(Error::invalid(
                "s1_dur_ms",
                format!(
                    "S1 ({} ms) runs past the S2 onset ({s2_onset_ms:.1} ms)",
                    self.s1_dur_ms
                ),
            ));
        }
        if s2_onset_ms + self.s2_dur_ms > cycle_ms {
            return Err(Error::invalid(
                "s2_dur_ms",
                format!("S2 ends past the cycle length ({cycle_ms:.1} ms)"),
            ));
        }
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("noise_snr_db", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Generated recording plus its clean and noise components, both scaled by
/// the same factor as the recording.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub recording: PcgRecording,
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
}

pub fn synth_pcg(cfg: &SynthConfig) -> Result<PcgRecording> {
    synth_pcg_parts(cfg).map(|o| o.recording)
}

pub fn synth_pcg_parts(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let fs = cfg.sample_rate_hz as f64;
    let n = (cfg.duration_s * fs).round() as usize;
    let cycle_s = 60.0 / cfg.bpm;
    let mut clean = vec![0.0; n];
    let mut annotations = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let s1_len = ms_to_samples(cfg.s1_dur_ms, fs);
    let s2_len = ms_to_samples(cfg.s2_dur_ms, fs);
    let mut cycle_starts = Vec::new();
    for k in 0.. {
        let start = (k as f64 * cycle_s * fs).round() as usize;
        let s2_start = ((k as f64 + cfg.systole_fraction) * cycle_s * fs).round() as usize;
        if start + s1_len > n || s2_start + s2_len > n {
            break;
        }
        cycle_starts.push((start, s2_start));
    }

    for (k, &(start, s2_start)) in cycle_starts.iter().enumerate() {
        let a1 = rng.random_range(0.75..1.0);
        let a2 = 0.8 * rng.random_range(0.75..1.0);
        let f1 = cfg.s1_center_hz * rng.random_range(0.95..1.05);
        let f2 = cfg.s2_center_hz * rng.random_range(0.95..1.05);
        add_burst(&mut clean[start..start + s1_len], a1, f1, fs);
        add_burst(&mut clean[s2_start..s2_start + s2_len], a2, f2, fs);

        let next = cycle_starts.get(k + 1).map_or(n, |c| c.0);
        annotations.push(StateInterval::new(start, start + s1_len, HeartState::S1)?);
        if s2_start > start + s1_len {
            annotations.push(StateInterval::new(start + s1_len, s2_start, HeartState::Systole)?);
        }
        annotations.push(StateInterval::new(s2_start, s2_start + s2_len, HeartState::S2)?);
        if next > s2_start + s2_len {
            annotations.push(StateInterval::new(s2_start + s2_len, next, HeartState::Diastole)?);
        }
    }

    let mut noise = vec![0.0; n];
    if let Some(snr_db) = cfg.noise_snr_db {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        noise_rng.set_stream(1);
        for v in noise.iter_mut() {
            *v = StandardNormal.sample(&mut noise_rng);
        }
        let p_clean = mean_power(&clean);
        let p_noise = mean_power(&noise);
        if p_clean > 0.0 && p_noise > 0.0 {
            let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
            noise.iter_mut().for_each(|v| *v *= gain);
        } else {
            noise.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    let peak = clean.iter().zip(&noise).map(|(c, z)| (c + z).abs()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { PEAK / peak } else { 1.0 };
    clean.iter_mut().for_each(|v| *v *= scale);
    noise.iter_mut().for_each(|v| *v *= scale);
    let samples: Vec<f64> = clean.iter().zip(&noise).map(|(c, z)| c + z).collect();

    let id = format!("synth-{:.0}bpm-{:016x}", cfg.bpm, cfg.rng_seed);
    let recording = PcgRecording::new(id, samples, cfg.sample_rate_hz, annotations)?;
    Ok(SynthOutput {
        recording,
        clean,
        noise,
    })
}

fn ms_to_samples(ms: f64, fs: f64) -> usize {
    ((ms * fs / 1000.0).round() as usize).max(1)
}

/// Damped sinusoid decaying to e^-3 of its peak over the burst.
fn add_burst(out: &mut [f64], amp: f64, freq: f64, fs: f64) {
    let tau = out.len() as f64 / fs / 3.0;
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v += amp * (-t / tau).exp() * (2.0 * PI * freq * t).sin();
    }
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}
