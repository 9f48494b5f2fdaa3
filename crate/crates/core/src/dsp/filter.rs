//! Butterworth low-pass filtering, applied forward and backward for zero
//! phase.
//!
//! The filter is realised as a cascade of second-order sections (plus one
//! first-order section for odd orders), each obtained by the bilinear
//! transform with frequency prewarping. Before filtering, the signal is
//! extended on both sides by symmetric reflection long enough for the
//! slowest pole to decay below 1e-14, and every section starts from its
//! steady state for the first input value.

use std::f64::consts::PI;

use super::reflect_index;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Section {
    b: [f64; 3],
    /// Denominator `1 + a[0]·z⁻¹ + a[1]·z⁻²`.
    a: [f64; 2],
}

impl Section {
    fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.sqrt()
        } else {
            let s = disc.sqrt();
            ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
        }
    }

    /// Runs the section in transposed direct form II, starting from the
    /// steady state for a constant input equal to `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // unit DC gain: steady output equals input
        let mut s2 = b2 * x0 - a2 * x0;
        let mut s1 = x0 - b0 * x0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + s1;
            s1 = b1 * xin - a1 * y + s2;
            s2 = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// Butterworth low-pass design as a cascade of sections.
#[derive(Debug, Clone)]
pub struct Butterworth {
    sections: Vec<Section>,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("order", "filter order must be at least 1"));
        }
        let nyq = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyq) {
            return Err(Error::invalid(
                "cutoff_hz",
                format!("{cutoff_hz} Hz not inside (0, {nyq})"),
            ));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let mut sections = Vec::new();
        for i in 0..order / 2 {
            let q = 1.0 / (2.0 * (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin());
            let norm = 1.0 / (1.0 + k / q + k * k);
            let b0 = k * k * norm;
            sections.push(Section {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            });
        }
        if order % 2 == 1 {
            let b0 = k / (1.0 + k);
            sections.push(Section {
                b: [b0, b0, 0.0],
                a: [(k - 1.0) / (k + 1.0), 0.0],
            });
        }
        Ok(Butterworth { sections })
    }

    fn settle_len(&self) -> usize {
        let r = self.sections.iter().map(Section::pole_radius).fold(0.0, f64::max);
        if r <= 0.0 {
            return 8;
        }
        ((1e-14f64).ln() / r.ln()).ceil().max(8.0) as usize
    }

    /// Causal filtering of `x` in place.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Forward-backward filtering of a reflection-extended copy of the signal.
    pub fn filtfilt(&self, samples: &[f64]) -> Vec<f64> {
        let n = samples.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.settle_len() * self.sections.len();
        let mut ext: Vec<f64> = (-(pad as i64)..(n + pad) as i64)
            .map(|i| samples[reflect_index(i, n)])
            .collect();
        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth low-pass.
pub fn lowpass_zero_phase(samples: &[f64], sample_rate_hz: u32, cutoff_hz: f64, order: usize) -> Result<Vec<f64>> {
    let f = Butterworth::lowpass(order, cutoff_hz, sample_rate_hz as f64)?;
    Ok(f.filtfilt(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn constant_passes_unchanged() {
        for order in 1..=5 {
            let y = lowpass_zero_phase(&[0.37; 500], 1600, 8.0, order).unwrap();
            assert!(y.iter().all(|v| (v - 0.37).abs() < 1e-9), "order {order}");
        }
        assert!(lowpass_zero_phase(&[0.0; 300], 1600, 8.0, 1)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn attenuates_high_tone() {
        let x: Vec<f64> = (0..3200)
            .map(|n| (2.0 * PI * 400.0 * n as f64 / 1600.0 + 0.3).sin())
            .collect();
        let y = lowpass_zero_phase(&x, 1600, 8.0, 1).unwrap();
        assert!(rms(&y) < 0.01 * rms(&x), "{}", rms(&y) / rms(&x));
    }

    #[test]
    fn cutoff_is_half_power_point() {
        // Forward-backward squares the magnitude: |H|² at cutoff = 1/2 → overall 1/2 in amplitude.
        let fs = 1600.0;
        for order in [1, 2, 4] {
            let x: Vec<f64> = (0..16000).map(|n| (2.0 * PI * 50.0 * n as f64 / fs).sin()).collect();
            let y = lowpass_zero_phase(&x, 1600, 50.0, order).unwrap();
            let ratio = rms(&y[4000..12000]) / rms(&x[4000..12000]);
            assert!((ratio - 0.5).abs() < 5e-3, "order {order}: {ratio}");
        }
    }

    #[test]
    fn zero_phase_symmetry() {
        let x: Vec<f64> = (0..1000).map(|n| ((n * 7919) % 1013) as f64 / 1013.0 - 0.5).collect();
        let y = lowpass_zero_phase(&x, 1600, 8.0, 1).unwrap();
        let xr: Vec<f64> = x.iter().rev().copied().collect();
        let yr = lowpass_zero_phase(&xr, 1600, 8.0, 1).unwrap();
        for (a, b) in y.iter().rev().zip(&yr) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_cutoff() {
        assert!(lowpass_zero_phase(&[1.0], 1600, 0.0, 1).is_err());
        assert!(lowpass_zero_phase(&[1.0], 1600, 800.0, 1).is_err());
        assert!(lowpass_zero_phase(&[1.0], 1600, 8.0, 0).is_err());
    }
}
