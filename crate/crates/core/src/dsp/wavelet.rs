//! Discrete wavelet analysis filter bank with bundled filter tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::reflect_index;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

const HAAR_LO: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const HAAR_HI: [f64; 2] = [-FRAC_1_SQRT_2, FRAC_1_SQRT_2];

const D4_LO: [f64; 4] = [
    -0.12940952255126037,
    0.2241438680420134,
    0.8365163037378079,
    0.48296291314453416,
];
const D4_HI: [f64; 4] = [
    -0.48296291314453416,
    0.8365163037378079,
    -0.2241438680420134,
    -0.12940952255126037,
];

// Reverse biorthogonal 3.9 analysis filters.
const RBIO39_LO: [f64; 20] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.1767766952966369,
    0.5303300858899106,
    0.5303300858899106,
    0.1767766952966369,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
];
const RBIO39_HI: [f64; 20] = [
    0.0006797443727836989,
    0.002039233118351097,
    -0.005060319219611981,
    -0.020618912641105536,
    0.014112787930175844,
    0.09913478249423216,
    -0.012300136269419315,
    -0.32019196836077857,
    -0.0020500227115698858,
    0.9421257006782068,
    -0.9421257006782068,
    0.0020500227115698858,
    0.32019196836077857,
    0.012300136269419315,
    -0.09913478249423216,
    -0.014112787930175844,
    0.020618912641105536,
    0.005060319219611981,
    -0.002039233118351097,
    -0.0006797443727836989,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wavelet {
    #[serde(rename = "haar")]
    Haar,
    /// Four-tap Daubechies filter (D4).
    #[serde(rename = "db2")]
    Daubechies4,
    #[serde(rename = "rbio3.9")]
    ReverseBiorthogonal39,
}

impl Wavelet {
    pub fn id(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Daubechies4 => "db2",
            Wavelet::ReverseBiorthogonal39 => "rbio3.9",
        }
    }

    pub fn dec_lo(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR_LO,
            Wavelet::Daubechies4 => &D4_LO,
            Wavelet::ReverseBiorthogonal39 => &RBIO39_LO,
        }
    }

    pub fn dec_hi(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR_HI,
            Wavelet::Daubechies4 => &D4_HI,
            Wavelet::ReverseBiorthogonal39 => &RBIO39_HI,
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Wavelet::Haar),
            "db2" | "d4" => Ok(Wavelet::Daubechies4),
            "rbio3.9" => Ok(Wavelet::ReverseBiorthogonal39),
            other => Err(Error::invalid("wavelet_id", format!("unknown wavelet `{other}`"))),
        }
    }
}

/// Filter and keep every other output: `y[n] = Σ f[k]·x[2n + 1 + c − k]`
/// with `c = (len(f) − 2) / 2`, so each output sits between input samples
/// `2n` and `2n + 1`. The signal is extended by symmetric reflection.
fn analyze(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = x.len();
    let c = (filter.len() as i64 - 2) / 2;
    (0..n.div_ceil(2))
        .map(|m| {
            let base = 2 * m as i64 + 1 + c;
            filter
                .iter()
                .enumerate()
                .filter(|(_, f)| **f != 0.0)
                .map(|(k, f)| f * x[reflect_index(base - k as i64, n)])
                .sum()
        })
        .collect()
}

/// One analysis stage: `(approximation, detail)`, each of length `ceil(n/2)`.
pub fn dwt_step(x: &[f64], wavelet: Wavelet) -> (Vec<f64>, Vec<f64>) {
    (analyze(x, wavelet.dec_lo()), analyze(x, wavelet.dec_hi()))
}

/// Detail coefficients after `level` stages of the analysis cascade.
pub fn dwt_detail(samples: &[f64], wavelet: Wavelet, level: usize) -> Result<Vec<f64>> {
    if level == 0 {
        return Err(Error::invalid("level", "level must be at least 1"));
    }
    let max_level = usize::BITS - 1 - samples.len().max(1).leading_zeros();
    if samples.is_empty() || level > max_level as usize {
        return Err(Error::invalid(
            "level",
            format!("level {level} exceeds log2 of the signal length {}", samples.len()),
        ));
    }
    let mut approx = samples.to_vec();
    let mut detail = Vec::new();
    for _ in 0..level {
        let (a, d) = dwt_step(&approx, wavelet);
        approx = a;
        detail = d;
    }
    Ok(detail)
}
