//! Classical one-column envelope and band-power features, reduced to one
//! value per frame of a [`FrameGrid`].

use crate::dsp::{analytic_envelope, dwt_detail, lowpass_zero_phase, power_spectrum, FrameGrid, Wavelet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::mel::LOG_FLOOR;

fn check_grid(samples: &[f64], grid: &FrameGrid) -> Result<()> {
    if grid.n_frames == 0 || samples.len() < grid.covered_len() {
        return Err(Error::invalid(
            "grid",
            format!(
                "grid covers {} samples but the signal has {}",
                grid.covered_len(),
                samples.len()
            ),
        ));
    }
    Ok(())
}

fn frame_means(values: &[f64], grid: &FrameGrid) -> Vec<f64> {
    (0..grid.n_frames)
        .map(|t| {
            let s = grid.frame_start(t);
            values[s..s + grid.frame_len_samples].iter().sum::<f64>() / grid.frame_len_samples as f64
        })
        .collect()
}

/// `exp(lowpass(ln(envelope + floor)))` read at each frame centre.
pub fn homomorphic_envelope_feature(
    samples: &[f64],
    grid: &FrameGrid,
    cutoff_hz: f64,
    order: usize,
) -> Result<Vec<f64>> {
    check_grid(samples, grid)?;
    let log_env: Vec<f64> = analytic_envelope(samples)
        .into_iter()
        .map(|e| (e + LOG_FLOOR).ln())
        .collect();
    let smooth = lowpass_zero_phase(&log_env, grid.sample_rate_hz, cutoff_hz, order)?;
    Ok((0..grid.n_frames).map(|t| smooth[grid.frame_center(t)].exp()).collect())
}

/// Hilbert envelope averaged over each frame.
pub fn hilbert_envelope_feature(samples: &[f64], grid: &FrameGrid) -> Result<Vec<f64>> {
    check_grid(samples, grid)?;
    Ok(frame_means(&analytic_envelope(samples), grid))
}

/// Magnitude of the level-`level` wavelet detail band, held constant over
/// the `2^level` input samples each coefficient spans, averaged per frame.
pub fn wavelet_envelope_feature(samples: &[f64], grid: &FrameGrid, wavelet: Wavelet, level: usize) -> Result<Vec<f64>> {
    check_grid(samples, grid)?;
    let detail = dwt_detail(samples, wavelet, level)?;
    let span = 1usize << level;
    let up: Vec<f64> = (0..samples.len())
        .map(|i| detail[(i / span).min(detail.len() - 1)].abs())
        .collect();
    Ok(frame_means(&up, grid))
}

/// Indices of spectrum bins whose centre frequency lies in `[lo, hi]`; the
/// single nearest bin when none does.
pub(crate) fn band_bins(fft_len: usize, sample_rate_hz: u32, lo_hz: f64, hi_hz: f64) -> Vec<usize> {
    let df = sample_rate_hz as f64 / fft_len as f64;
    let n_bins = fft_len / 2 + 1;
    let inside: Vec<usize> = (0..n_bins)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= lo_hz && f <= hi_hz
        })
        .collect();
    if inside.is_empty() {
        let mid = 0.5 * (lo_hz + hi_hz) / df;
        vec![(mid.round() as usize).min(n_bins - 1)]
    } else {
        inside
    }
}

/// Mean power-spectrum value over the band, per (Hamming-weighted) frame.
pub fn psd_feature_from_frames(
    frames: &Matrix,
    grid: &FrameGrid,
    band_lo_hz: f64,
    band_hi_hz: f64,
) -> Result<Vec<f64>> {
    let nyq = grid.sample_rate_hz as f64 / 2.0;
    if !(band_lo_hz >= 0.0 && band_lo_hz <= band_hi_hz && band_hi_hz <= nyq) {
        return Err(Error::invalid(
            "psd band",
            format!("need 0 ≤ lo ≤ hi ≤ {nyq}, got {band_lo_hz}..{band_hi_hz}"),
        ));
    }
    let fft_len = crate::dsp::fft_len_for(frames.cols());
    let bins = band_bins(fft_len, grid.sample_rate_hz, band_lo_hz, band_hi_hz);
    Ok(frames
        .iter_rows()
        .map(|f| {
            let p = power_spectrum(f);
            bins.iter().map(|&k| p[k]).sum::<f64>() / bins.len() as f64
        })
        .collect())
}

/// Band power per frame, framing `samples` on `grid` with a Hamming window.
pub fn psd_feature(samples: &[f64], grid: &FrameGrid, band_lo_hz: f64, band_hi_hz: f64) -> Result<Vec<f64>> {
    check_grid(samples, grid)?;
    let win = crate::dsp::hamming(grid.frame_len_samples);
    let mut frames = Matrix::zeros(grid.n_frames, grid.frame_len_samples);
    for t in 0..grid.n_frames {
        let s = grid.frame_start(t);
        for (i, o) in frames.row_mut(t).iter_mut().enumerate() {
            *o = samples[s + i] * win[i];
        }
    }
    psd_feature_from_frames(&frames, grid, band_lo_hz, band_hi_hz)
}
