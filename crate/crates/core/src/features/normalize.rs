use serde::{Deserialize, Serialize};

use super::FeatureSequence;
use crate::error::{Error, Result};

/// Columns whose standard deviation falls below this are only centred.
pub const MIN_STD: f64 = 1e-8;

/// Per-column z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Pooled statistics over every frame of every sequence.
    pub fn fit<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<Self> {
        let mut dim = None;
        let mut n = 0usize;
        let mut sum = Vec::new();
        let mut seqs_seen = Vec::new();
        for s in seqs {
            let d = *dim.get_or_insert(s.dim());
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "normalization columns",
                    expected: d,
                    got: s.dim(),
                });
            }
            if sum.is_empty() {
                sum = vec![0.0; d];
            }
            for row in s.frames.iter_rows() {
                for (a, v) in sum.iter_mut().zip(row) {
                    *a += v;
                }
            }
            n += s.n_frames();
            seqs_seen.push(s);
        }
        if n == 0 {
            return Err(Error::invalid("features", "cannot fit statistics on zero frames"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for s in &seqs_seen {
            for row in s.frames.iter_rows() {
                for ((a, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *a += (v - m) * (v - m);
                }
            }
        }
        let std = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        Ok(NormStats { mean, std })
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        if seq.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "normalization columns",
                expected: self.mean.len(),
                got: seq.dim(),
            });
        }
        let mut out = seq.clone();
        for t in 0..out.n_frames() {
            for (c, v) in out.frames.row_mut(t).iter_mut().enumerate() {
                *v -= self.mean[c];
                if self.std[c] >= MIN_STD {
                    *v /= self.std[c];
                }
            }
        }
        Ok(out)
    }
}

/// Z-scores `features` with `stats`, fitting them on `features` itself when
/// absent. Returns the statistics actually used.
pub fn normalize(features: &FeatureSequence, stats: Option<&NormStats>) -> Result<(FeatureSequence, NormStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormStats::fit([features])?,
    };
    Ok((stats.apply(features)?, stats))
}
