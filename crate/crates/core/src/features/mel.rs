use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor applied before every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Band edges in Hz: `n_bands + 2` points equally spaced on the Mel scale.
pub fn mel_band_edges(n_bands: usize, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let (m_lo, m_hi) = (hz_to_mel(lo_hz), hz_to_mel(hi_hz));
    let steps = (n_bands + 1) as f64;
    (0..n_bands + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / steps))
        .collect()
}

/// Triangular Mel filterbank over the one-sided spectrum of an
/// `fft_len`-point FFT. Edges are snapped to the nearest bin; filter `k`
/// rises from edge `k` to a peak of exactly 1 at edge `k+1` and falls to
/// zero at edge `k+2`.
pub fn mel_filterbank(n_bands: usize, lo_hz: f64, hi_hz: f64, fft_len: usize, sample_rate_hz: u32) -> Result<Matrix> {
    let nyq = sample_rate_hz as f64 / 2.0;
    if n_bands == 0 {
        return Err(Error::invalid("n_bands", "need at least one band"));
    }
    if !(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz <= nyq) {
        return Err(Error::invalid(
            "mel range",
            format!("need 0 ≤ lo < hi ≤ {nyq}, got {lo_hz}..{hi_hz}"),
        ));
    }
    let n_bins = fft_len / 2 + 1;
    let bins: Vec<usize> = mel_band_edges(n_bands, lo_hz, hi_hz)
        .iter()
        .map(|f| ((f * fft_len as f64 / sample_rate_hz as f64).round() as usize).min(n_bins - 1))
        .collect();
    if let Some(k) = bins.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "n_bands",
            format!(
                "band {} narrower than two FFT bins (edges snap to bins {:?})",
                k.saturating_sub(1),
                bins
            ),
        ));
    }
    let mut fb = Matrix::zeros(n_bands, n_bins);
    for k in 0..n_bands {
        let (l, c, r) = (bins[k], bins[k + 1], bins[k + 2]);
        for j in l..=r {
            let w = if j <= c {
                (j - l) as f64 / (c - l) as f64
            } else {
                (r - j) as f64 / (r - c) as f64
            };
            fb.set(k, j, w);
        }
    }
    Ok(fb)
}

/// Orthonormal DCT-II of `x`, first `n_out` coefficients.
pub fn dct2_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let s = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            s * x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .sum::<f64>()
        })
        .collect()
}

/// Log filterbank energies, one row per frame.
pub fn log_mel_energies(power_spectra: &Matrix, filterbank: &Matrix) -> Result<Matrix> {
    if power_spectra.cols() != filterbank.cols() {
        return Err(Error::DimensionMismatch {
            context: "filterbank bins",
            expected: filterbank.cols(),
            got: power_spectra.cols(),
        });
    }
    let mut out = Matrix::zeros(power_spectra.rows(), filterbank.rows());
    for t in 0..power_spectra.rows() {
        let mut e = vec![0.0; filterbank.rows()];
        filterbank.matvec_add(power_spectra.row(t), &mut e);
        for (o, v) in out.row_mut(t).iter_mut().zip(e) {
            *o = v.max(LOG_FLOOR).ln();
        }
    }
    Ok(out)
}

/// MFCCs: orthonormal DCT-II of floored log Mel energies, coefficients
/// `0..n_coeffs`.
pub fn mfcc(power_spectra: &Matrix, filterbank: &Matrix, n_coeffs: usize) -> Result<Matrix> {
    if n_coeffs == 0 || n_coeffs > filterbank.rows() {
        return Err(Error::invalid(
            "n_coeffs",
            format!("{n_coeffs} not in 1..={}", filterbank.rows()),
        ));
    }
    let logs = log_mel_energies(power_spectra, filterbank)?;
    let mut out = Matrix::zeros(logs.rows(), n_coeffs);
    for t in 0..logs.rows() {
        out.row_mut(t).copy_from_slice(&dct2_ortho(logs.row(t), n_coeffs));
    }
    Ok(out)
}
