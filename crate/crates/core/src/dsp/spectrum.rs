use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

/// FFT length used for a frame of `len` samples.
pub fn fft_len_for(len: usize) -> usize {
    len.max(1).next_power_of_two()
}

/// One-sided power spectrum `|X[k]|²`, `k = 0..=L/2`, of the frame
/// zero-padded to the next power of two `L`. Empty input gives an empty
/// spectrum.
pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    if frame.is_empty() {
        return Vec::new();
    }
    let n = fft_len_for(frame.len());
    let mut buf: Vec<Complex64> = frame
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft_in_place(&mut buf, false);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Magnitude of the analytic signal (Hilbert envelope), computed by zeroing
/// negative frequencies and doubling positive ones.
pub fn analytic_envelope(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, false);
    // DC and (for even n) Nyquist keep unit weight.
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        if k < half || (k == half && n % 2 == 1) {
            *v *= 2.0;
        } else if k > half {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.norm() * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft_power(x: &[f64], k: usize) -> f64 {
        let n = x.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ang = -2.0 * PI * k as f64 * i as f64 / n;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        re * re + im * im
    }

    #[test]
    fn zero_and_impulse() {
        assert!(power_spectrum(&[0.0; 128]).iter().all(|&p| p == 0.0));
        let mut d = vec![0.0; 128];
        d[0] = 1.0;
        let p = power_spectrum(&d);
        assert_eq!(p.len(), 65);
        assert!(p.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn bin_eight_matches_direct_dft() {
        let x: Vec<f64> = (0..128).map(|n| (2.0 * PI * 8.0 * n as f64 / 128.0).cos()).collect();
        let p = power_spectrum(&x);
        let argmax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, 8);
        for k in [0, 3, 8, 9, 64] {
            assert!((p[k] - naive_dft_power(&x, k)).abs() < 1e-8, "bin {k}");
        }
        let off: f64 = p.iter().enumerate().filter(|(k, _)| *k != 8).map(|(_, v)| v).sum();
        assert!(off < 1e-18 * p[8].max(1.0) + 1e-12);
    }

    #[test]
    fn zero_pads_to_power_of_two() {
        assert_eq!(power_spectrum(&[1.0; 100]).len(), 65);
        assert!(power_spectrum(&[]).is_empty());
    }

    #[test]
    fn envelope_of_tone_is_flat() {
        let x: Vec<f64> = (0..4000)
            .map(|n| 0.7 * (2.0 * PI * 37.3 * n as f64 / 1600.0).sin())
            .collect();
        let env = analytic_envelope(&x);
        for v in &env[400..3600] {
            assert!((v - 0.7).abs() < 0.014, "{v}");
        }
        assert!(analytic_envelope(&[0.0; 64]).iter().all(|&v| v == 0.0));
        let scaled: Vec<f64> = x.iter().map(|v| -3.0 * v).collect();
        let env3 = analytic_envelope(&scaled);
        for (a, b) in env.iter().zip(&env3) {
            assert!((3.0 * a - b).abs() < 1e-9);
        }
    }
}
