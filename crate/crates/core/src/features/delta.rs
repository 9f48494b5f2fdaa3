use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Regression deltas along time (rows), per column:
/// `Δ_t = Σ_{n=1..w} n·(c_{t+n} − c_{t−n}) / (2·Σ n²)`, with edge rows
/// replicated beyond the sequence ends.
pub fn delta(coeffs: &Matrix, width: usize) -> Result<Matrix> {
    if width == 0 {
        return Err(Error::invalid("width", "delta width must be at least 1"));
    }
    let t_len = coeffs.rows();
    if t_len == 0 {
        return Err(Error::invalid("coeffs", "empty coefficient sequence"));
    }
    let denom = 2.0 * (1..=width).map(|n| (n * n) as f64).sum::<f64>();
    let last = t_len as i64 - 1;
    let clamp = |t: i64| t.clamp(0, last) as usize;
    let mut out = Matrix::zeros(t_len, coeffs.cols());
    for t in 0..t_len as i64 {
        let row = out.row_mut(t as usize);
        for n in 1..=width as i64 {
            let ahead = coeffs.row(clamp(t + n));
            let behind = coeffs.row(clamp(t - n));
            for ((o, a), b) in row.iter_mut().zip(ahead).zip(behind) {
                *o += n as f64 * (a - b);
            }
        }
        row.iter_mut().for_each(|v| *v /= denom);
    }
    Ok(out)
}
