//! Signal primitives: resampling, framing, spectra, envelopes, filtering and
//! wavelet analysis.

mod filter;
mod frame;
mod resample;
mod spectrum;
mod wavelet;

pub use filter::{lowpass_zero_phase, Butterworth};
pub use frame::{frame_signal, hamming, FrameGrid};
pub use resample::{resample, KAISER_BETA};
pub use spectrum::{analytic_envelope, fft_len_for, power_spectrum};
pub use wavelet::{dwt_detail, dwt_step, Wavelet};

/// Maps any integer index onto `[0, n)` by symmetric reflection with the
/// edge sample repeated (`x[-1] = x[0]`, `x[n] = x[n-1]`), periodic with
/// period `2n`.
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reflection() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect_index(i, 3)).collect();
        assert_eq!(idx, vec![2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0, 1]);
    }

    proptest! {
        #[test]
        fn parseval(xs in proptest::collection::vec(-1.0f64..1.0, 1..300)) {
            let p = power_spectrum(&xs);
            let l = fft_len_for(xs.len());
            let half = l / 2;
            let total: f64 = if l == 1 {
                p[0]
            } else {
                p[0] + p[half] + 2.0 * p[1..half].iter().sum::<f64>()
            };
            let energy: f64 = xs.iter().map(|v| v * v).sum::<f64>() * l as f64;
            prop_assert!((total - energy).abs() <= 1e-6 * energy.max(1e-300));
        }
    }
}
