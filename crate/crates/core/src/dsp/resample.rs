//! Rational-factor resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use super::reflect_index;
use crate::error::{Error, Result};

/// Kaiser shape parameter.
pub const KAISER_BETA: f64 = 8.6;
/// Kernel half-width in zero crossings of the (lower) cutoff.
const ZERO_CROSSINGS: f64 = 16.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resamples from `from_hz` to `to_hz`. The output has
/// `ceil(len · to / from)` samples; equal rates return the input unchanged.
pub fn resample(samples: &[f64], from_hz: u32, to_hz: u32) -> Result<Vec<f64>> {
    if from_hz == 0 || to_hz == 0 {
        return Err(Error::invalid("rate", "sample rates must be positive"));
    }
    if samples.is_empty() {
        return Err(Error::invalid("samples", "cannot resample an empty signal"));
    }
    if from_hz == to_hz {
        return Ok(samples.to_vec());
    }
    let g = gcd(from_hz as u64, to_hz as u64);
    let up = to_hz as u64 / g;
    let down = from_hz as u64 / g;
    let n_in = samples.len();
    let n_out = ((n_in as u64 * up).div_ceil(down)) as usize;

    // Cutoff in cycles per input sample.
    let fc = 0.5 * ROLLOFF * (up as f64 / down as f64).min(1.0);
    let half_width = ZERO_CROSSINGS / (2.0 * fc);
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel = |tau: f64| -> f64 {
        let r = tau / half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        2.0 * fc * sinc(2.0 * fc * tau) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
    };

    let reach = half_width.ceil() as i64;
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as u64 {
        let num = m * down;
        let base = (num / up) as i64;
        let frac = (num % up) as f64 / up as f64;
        let mut acc = 0.0;
        for k in (base - reach)..=(base + reach + 1) {
            let tau = (base - k) as f64 + frac;
            let w = kernel(tau);
            if w != 0.0 {
                acc += w * samples[reflect_index(k, n_in)];
            }
        }
        out.push(acc);
    }
    Ok(out)
}
