use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Layout of fixed-length, fixed-shift frames over a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub frame_len_samples: usize,
    pub frame_shift_samples: usize,
    pub n_frames: usize,
    pub sample_rate_hz: u32,
}

impl FrameGrid {
    /// Grid for a signal of `n_samples`; window and shift are rounded to
    /// whole samples.
    pub fn new(n_samples: usize, sample_rate_hz: u32, win_ms: f64, shift_ms: f64) -> Result<Self> {
        let fs = sample_rate_hz as f64;
        let len = (win_ms * fs / 1000.0).round() as usize;
        let shift = (shift_ms * fs / 1000.0).round() as usize;
        if len == 0 || shift == 0 {
            return Err(Error::invalid(
                "win_ms/shift_ms",
                "window and shift must span at least one sample",
            ));
        }
        if shift > len {
            return Err(Error::invalid("shift_ms", "frame shift exceeds the window length"));
        }
        if n_samples < len {
            return Err(Error::invalid(
                "samples",
                format!("signal of {n_samples} samples is shorter than one {len}-sample window"),
            ));
        }
        Ok(FrameGrid {
            frame_len_samples: len,
            frame_shift_samples: shift,
            n_frames: (n_samples - len) / shift + 1,
            sample_rate_hz,
        })
    }

    pub fn frame_start(&self, t: usize) -> usize {
        t * self.frame_shift_samples
    }

    pub fn frame_center(&self, t: usize) -> usize {
        self.frame_start(t) + self.frame_len_samples / 2
    }

    /// Samples `[0, covered_len)` touched by at least one frame.
    pub fn covered_len(&self) -> usize {
        (self.n_frames - 1) * self.frame_shift_samples + self.frame_len_samples
    }

    pub fn shift_ms(&self) -> f64 {
        self.frame_shift_samples as f64 * 1000.0 / self.sample_rate_hz as f64
    }
}

/// Symmetric Hamming window `0.54 − 0.46·cos(2πn/(L−1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Cuts the signal into Hamming-weighted frames, one per matrix row.
pub fn frame_signal(samples: &[f64], sample_rate_hz: u32, win_ms: f64, shift_ms: f64) -> Result<(FrameGrid, Matrix)> {
    let grid = FrameGrid::new(samples.len(), sample_rate_hz, win_ms, shift_ms)?;
    let win = hamming(grid.frame_len_samples);
    let mut frames = Matrix::zeros(grid.n_frames, grid.frame_len_samples);
    for t in 0..grid.n_frames {
        let start = grid.frame_start(t);
        let src = &samples[start..start + grid.frame_len_samples];
        for ((o, s), w) in frames.row_mut(t).iter_mut().zip(src).zip(&win) {
            *o = s * w;
        }
    }
    Ok((grid, frames))
}
