//! Per-frame feature extraction.
//!
//! [`extract`] resamples a recording to the analysis rate, frames it with a
//! Hamming window and stacks the requested feature groups column-wise in the
//! order given by [`FeatureSpec::components`].

mod delta;
mod dump;
mod envelope;
mod mel;
mod normalize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{frame_signal, power_spectrum, resample, FrameGrid, Wavelet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::PcgRecording;

pub use delta::delta;
pub use dump::{read_feature_csv, write_feature_dump, FeatureSidecar};
pub use envelope::{
    hilbert_envelope_feature, homomorphic_envelope_feature, psd_feature, psd_feature_from_frames,
    wavelet_envelope_feature,
};
pub use mel::{dct2_ortho, hz_to_mel, log_mel_energies, mel_band_edges, mel_filterbank, mel_to_hz, mfcc, LOG_FLOOR};
pub use normalize::{normalize, NormStats};

/// One feature group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureKind {
    Mfcc,
    Delta,
    Delta2,
    Hoe,
    Hie,
    We,
    Psd,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Mfcc,
        FeatureKind::Delta,
        FeatureKind::Delta2,
        FeatureKind::Hoe,
        FeatureKind::Hie,
        FeatureKind::We,
        FeatureKind::Psd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "MFCC",
            FeatureKind::Delta => "DELTA",
            FeatureKind::Delta2 => "DELTA2",
            FeatureKind::Hoe => "HOE",
            FeatureKind::Hie => "HIE",
            FeatureKind::We => "WE",
            FeatureKind::Psd => "PSD",
        }
    }

    /// Column-name prefix; multi-column groups append the coefficient index.
    fn column_prefix(self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Delta => "d",
            FeatureKind::Delta2 => "dd",
            FeatureKind::Hoe => "hoe",
            FeatureKind::Hie => "hie",
            FeatureKind::We => "we",
            FeatureKind::Psd => "psd",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let alias = match up.as_str() {
            "Δ" | "D" => "DELTA",
            "Δ2" | "Δ²" | "DD" => "DELTA2",
            other => other,
        };
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == alias)
            .ok_or_else(|| Error::invalid("features", format!("unknown feature `{s}`")))
    }
}

/// Parses a `+`- or `,`-separated list such as `MFCC+DELTA+DELTA2`.
pub fn parse_components(list: &str) -> Result<Vec<FeatureKind>> {
    list.split(['+', ','])
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub components: Vec<FeatureKind>,
    pub n_mfcc: usize,
    pub n_mel_bands: usize,
    pub mel_lo_hz: f64,
    pub mel_hi_hz: f64,
    pub delta_width: usize,
    /// Analysis sample rate; recordings are resampled to it first.
    pub resample_hz: u32,
    pub homomorphic_cutoff_hz: f64,
    pub homomorphic_order: usize,
    pub wavelet: Wavelet,
    pub wavelet_level: usize,
    pub psd_lo_hz: f64,
    pub psd_hi_hz: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            components: vec![FeatureKind::Mfcc, FeatureKind::Delta, FeatureKind::Delta2],
            n_mfcc: 6,
            n_mel_bands: 6,
            mel_lo_hz: 30.0,
            mel_hi_hz: 300.0,
            delta_width: 2,
            resample_hz: 1600,
            homomorphic_cutoff_hz: 8.0,
            homomorphic_order: 1,
            wavelet: Wavelet::ReverseBiorthogonal39,
            wavelet_level: 3,
            psd_lo_hz: 40.0,
            psd_hi_hz: 60.0,
        }
    }
}

impl FeatureSpec {
    pub fn with_components(components: Vec<FeatureKind>) -> Self {
        FeatureSpec {
            components,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("components", "at least one feature group is required"));
        }
        for (i, k) in self.components.iter().enumerate() {
            if self.components[..i].contains(k) {
                return Err(Error::invalid("components", format!("{k} listed twice")));
            }
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mel_bands {
            return Err(Error::invalid(
                "n_mfcc",
                format!("{} not in 1..={} (number of Mel bands)", self.n_mfcc, self.n_mel_bands),
            ));
        }
        if self.resample_hz == 0 {
            return Err(Error::invalid("resample_hz", "must be positive"));
        }
        let nyq = self.resample_hz as f64 / 2.0;
        if !(self.mel_lo_hz < self.mel_hi_hz && self.mel_hi_hz < nyq) {
            return Err(Error::invalid(
                "mel range",
                format!("need lo < hi < {nyq}, got {}..{}", self.mel_lo_hz, self.mel_hi_hz),
            ));
        }
        if self.delta_width == 0 {
            return Err(Error::invalid("delta_width", "must be at least 1"));
        }
        if self.wavelet_level == 0 {
            return Err(Error::invalid("wavelet_level", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of columns each group contributes.
    pub fn group_width(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::Mfcc | FeatureKind::Delta | FeatureKind::Delta2 => self.n_mfcc,
            _ => 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.iter().map(|&k| self.group_width(k)).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for &k in &self.components {
            let w = self.group_width(k);
            if w == 1 && !matches!(k, FeatureKind::Mfcc | FeatureKind::Delta | FeatureKind::Delta2) {
                names.push(k.column_prefix().to_string());
            } else {
                names.extend((0..w).map(|i| format!("{}{i}", k.column_prefix())));
            }
        }
        names
    }

    /// Column ranges of each group, in component order.
    pub fn groups(&self) -> Vec<(FeatureKind, std::ops::Range<usize>)> {
        let mut start = 0;
        self.components
            .iter()
            .map(|&k| {
                let w = self.group_width(k);
                let r = start..start + w;
                start += w;
                (k, r)
            })
            .collect()
    }
}

/// Feature-group combinations of the classical-feature comparison table,
/// in the table's row order.
pub fn feature_table_rows() -> Vec<(&'static str, Vec<FeatureKind>)> {
    use FeatureKind::*;
    vec![
        ("HoE", vec![Hoe]),
        ("HiE", vec![Hie]),
        ("WE", vec![We]),
        ("PSD", vec![Psd]),
        ("MFCC", vec![Mfcc]),
        ("Δ", vec![Delta]),
        ("Δ²", vec![Delta2]),
        ("HoE + WE", vec![Hoe, We]),
        ("HiE + WE", vec![Hie, We]),
        ("HoE + HiE + WE + PSD", vec![Hoe, Hie, We, Psd]),
        ("WE + PSD + MFCC", vec![We, Psd, Mfcc]),
        ("WE + HiE + MFCC + Δ", vec![We, Hie, Mfcc, Delta]),
        ("WE + MFCC + Δ + PSD", vec![We, Mfcc, Delta, Psd]),
        (
            "WE + HoE + HiE + PSD + MFCC + Δ + Δ²",
            vec![We, Hoe, Hie, Psd, Mfcc, Delta, Delta2],
        ),
        ("MFCC + Δ + Δ²", vec![Mfcc, Delta, Delta2]),
    ]
}

/// Time-major feature matrix of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub recording_id: String,
    pub frames: Matrix,
    pub grid: FrameGrid,
    pub feature_names: Vec<String>,
}

impl FeatureSequence {
    pub fn new(recording_id: String, frames: Matrix, grid: FrameGrid, feature_names: Vec<String>) -> Result<Self> {
        if frames.cols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                context: "feature names",
                expected: frames.cols(),
                got: feature_names.len(),
            });
        }
        if frames.rows() != grid.n_frames {
            return Err(Error::DimensionMismatch {
                context: "frame count",
                expected: grid.n_frames,
                got: frames.rows(),
            });
        }
        if frames.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(FeatureSequence {
            recording_id,
            frames,
            grid,
            feature_names,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }
}

/// Extracts the features named by `spec` from a recording.
pub fn extract(recording: &PcgRecording, spec: &FeatureSpec, win_ms: f64, shift_ms: f64) -> Result<FeatureSequence> {
    spec.validate()?;
    let samples = resample(recording.samples(), recording.sample_rate_hz(), spec.resample_hz)?;
    extract_samples(recording.id(), &samples, spec, win_ms, shift_ms)
}

/// Extraction on samples already at `spec.resample_hz`.
pub fn extract_samples(
    id: &str,
    samples: &[f64],
    spec: &FeatureSpec,
    win_ms: f64,
    shift_ms: f64,
) -> Result<FeatureSequence> {
    spec.validate()?;
    let rate = spec.resample_hz;
    let (grid, frames) = frame_signal(samples, rate, win_ms, shift_ms)?;

    let needs = |k: FeatureKind| spec.components.contains(&k);
    let cepstral = needs(FeatureKind::Mfcc) || needs(FeatureKind::Delta) || needs(FeatureKind::Delta2);
    let mut mfccs = None;
    let mut deltas = None;
    let mut delta2s = None;
    if cepstral {
        let spectra = Matrix::from_rows(&frames.iter_rows().map(power_spectrum).collect::<Vec<_>>());
        let fft_len = crate::dsp::fft_len_for(grid.frame_len_samples);
        let fb = mel_filterbank(spec.n_mel_bands, spec.mel_lo_hz, spec.mel_hi_hz, fft_len, rate)?;
        let m = mfcc(&spectra, &fb, spec.n_mfcc)?;
        if needs(FeatureKind::Delta) || needs(FeatureKind::Delta2) {
            let d = delta(&m, spec.delta_width)?;
            if needs(FeatureKind::Delta2) {
                delta2s = Some(delta(&d, spec.delta_width)?);
            }
            deltas = Some(d);
        }
        mfccs = Some(m);
    }

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(spec.dim());
    for &k in &spec.components {
        match k {
            FeatureKind::Mfcc | FeatureKind::Delta | FeatureKind::Delta2 => {
                let m = match k {
                    FeatureKind::Mfcc => mfccs.as_ref(),
                    FeatureKind::Delta => deltas.as_ref(),
                    _ => delta2s.as_ref(),
                }
                .expect("cepstral features computed above");
                columns.extend((0..m.cols()).map(|c| m.column(c)));
            }
            FeatureKind::Hoe => columns.push(homomorphic_envelope_feature(
                samples,
                &grid,
                spec.homomorphic_cutoff_hz,
                spec.homomorphic_order,
            )?),
            FeatureKind::Hie => columns.push(hilbert_envelope_feature(samples, &grid)?),
            FeatureKind::We => columns.push(wavelet_envelope_feature(
                samples,
                &grid,
                spec.wavelet,
                spec.wavelet_level,
            )?),
            FeatureKind::Psd => columns.push(psd_feature_from_frames(&frames, &grid, spec.psd_lo_hz, spec.psd_hi_hz)?),
        }
    }

    let mut out = Matrix::zeros(grid.n_frames, columns.len());
    for (c, col) in columns.iter().enumerate() {
        for (t, v) in col.iter().enumerate() {
            out.set(t, c, *v);
        }
    }
    FeatureSequence::new(id.to_string(), out, grid, spec.feature_names())
}
