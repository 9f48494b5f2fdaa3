use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::PcgRecording;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

/// Reads a mono 16-bit PCM WAV file. The recording id is the file stem and
/// the annotation list is empty.
pub fn load_wav(path: impl AsRef<Path>) -> Result<PcgRecording> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let shown = path.display().to_string();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::UnsupportedEncoding {
            path: shown.clone(),
            detail: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::MultiChannel {
            path: shown,
            channels: spec.channels,
        });
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding {
            path: shown,
            detail: format!("{:?} {}-bit", spec.sample_format, spec.bits_per_sample),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::UnsupportedEncoding {
            path: shown.clone(),
            detail: e.to_string(),
        })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    PcgRecording::new(id, samples, spec.sample_rate, Vec::new())
}

/// Writes samples as mono 16-bit PCM. Values are rounded to the nearest
/// code and saturated at the 16-bit limits.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(other.to_string())),
    };
    let mut writer = WavWriter::create(path, spec).map_err(wrap)?;
    for &s in samples {
        let code = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}
