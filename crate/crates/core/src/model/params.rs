use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelDims, Pooling};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Weights of one LSTM direction. Gate blocks are stacked `[i; f; g; o]`,
/// each `H` rows tall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    /// `4H × D`
    pub w_x: Matrix,
    /// `4H × H`
    pub w_h: Matrix,
    /// `4H`
    pub b: Vec<f64>,
}

impl LstmWeights {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmWeights {
            w_x: Matrix::zeros(4 * hidden, input_dim),
            w_h: Matrix::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.cols()
    }
}

/// Every trainable array of the network. The same shape doubles as a
/// gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub fwd: LstmWeights,
    pub bwd: LstmWeights,
    /// `A × 2H`
    pub att_w: Matrix,
    /// `A`
    pub att_b: Vec<f64>,
    /// Attention context vector `u`, length `A`.
    pub context: Vec<f64>,
    /// `2H`
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

/// Names of the parameter arrays in flattening and checkpoint order.
pub const PARAM_ORDER: [&str; 11] = [
    "fwd.w_x",
    "fwd.w_h",
    "fwd.b",
    "bwd.w_x",
    "bwd.w_h",
    "bwd.b",
    "att.w",
    "att.b",
    "att.context",
    "out.w",
    "out.b",
];

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let (d, h, a) = (dims.input_dim, dims.hidden_dim, dims.attn_dim);
        ModelParams {
            dims,
            fwd: LstmWeights::zeros(d, h),
            bwd: LstmWeights::zeros(d, h),
            att_w: Matrix::zeros(a, 2 * h),
            att_b: vec![0.0; a],
            context: vec![0.0; a],
            out_w: vec![0.0; 2 * h],
            out_b: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// Arrays in [`PARAM_ORDER`].
    pub fn arrays(&self) -> [&[f64]; 11] {
        [
            self.fwd.w_x.as_slice(),
            self.fwd.w_h.as_slice(),
            &self.fwd.b,
            self.bwd.w_x.as_slice(),
            self.bwd.w_h.as_slice(),
            &self.bwd.b,
            self.att_w.as_slice(),
            &self.att_b,
            &self.context,
            &self.out_w,
            std::slice::from_ref(&self.out_b),
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 11] {
        [
            self.fwd.w_x.as_mut_slice(),
            self.fwd.w_h.as_mut_slice(),
            &mut self.fwd.b,
            self.bwd.w_x.as_mut_slice(),
            self.bwd.w_h.as_mut_slice(),
            &mut self.bwd.b,
            self.att_w.as_mut_slice(),
            &mut self.att_b,
            &mut self.context,
            &mut self.out_w,
            std::slice::from_mut(&mut self.out_b),
        ]
    }

    pub fn len(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.arrays().concat()
    }

    pub fn from_flat(dims: ModelDims, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(dims);
        if flat.len() != p.len() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: p.len(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for arr in p.arrays_mut() {
            arr.copy_from_slice(&flat[off..off + arr.len()]);
            off += arr.len();
        }
        Ok(p)
    }

    /// Visits every scalar in flat order.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut i = 0;
        for arr in self.arrays_mut() {
            for v in arr.iter_mut() {
                f(i, v);
                i += 1;
            }
        }
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_mut(|_, v| *v *= s);
    }

    pub fn l2_norm(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|a| a.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Number of trainable scalars.
pub fn count_params(params: &ModelParams) -> usize {
    params.len()
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.random_range(-limit..limit);
    }
}

/// Fills a `4H × H` matrix with orthonormal columns (modified Gram-Schmidt
/// on a Gaussian draw).
fn orthogonal(rng: &mut ChaCha8Rng, m: &mut Matrix) {
    let (rows, cols) = m.shape();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while q.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        for u in &q {
            let p = crate::matrix::dot(&v, u);
            crate::matrix::axpy(-p, u, &mut v);
        }
        let n = crate::matrix::dot(&v, &v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            q.push(v);
        }
    }
    for (c, col) in q.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m.set(r, c, *v);
        }
    }
}

fn init_lstm(rng: &mut ChaCha8Rng, w: &mut LstmWeights) {
    let h = w.hidden_dim();
    let d = w.w_x.cols();
    glorot(rng, d, 4 * h, w.w_x.as_mut_slice());
    orthogonal(rng, &mut w.w_h);
    w.b.iter_mut().for_each(|b| *b = 0.0);
    w.b[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
}

/// Glorot-uniform input and projection weights, orthogonal recurrent
/// weights, forget-gate bias 1, context vector `U(-0.1, 0.1)`, zero biases.
pub fn init_params(dims: ModelDims, config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    dims.validate(config.pooling)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(dims);
    init_lstm(&mut rng, &mut p.fwd);
    init_lstm(&mut rng, &mut p.bwd);
    let h2 = 2 * dims.hidden_dim;
    if config.pooling == Pooling::Attention {
        glorot(&mut rng, h2, dims.attn_dim, p.att_w.as_mut_slice());
        for u in &mut p.context {
            *u = rng.random_range(-0.1..0.1);
        }
    }
    glorot(&mut rng, h2, 1, &mut p.out_w);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_formula() {
        for (d, h) in [(18, 80), (18, 20), (1, 1), (5, 3)] {
            let dims = ModelDims::new(d, h, 7);
            let p = init_params(dims, &ModelConfig::default(), 0).unwrap();
            assert_eq!(count_params(&p), dims.param_count());
        }
        let mean = ModelDims {
            attn_dim: 0,
            ..ModelDims::new(18, 40, 7)
        };
        let cfg = ModelConfig {
            pooling: Pooling::Mean,
            ..Default::default()
        };
        assert_eq!(count_params(&init_params(mean, &cfg, 0).unwrap()), mean.param_count());
    }

    #[test]
    fn init_properties() {
        let dims = ModelDims::new(6, 8, 7);
        let p = init_params(dims, &ModelConfig::default(), 3).unwrap();
        assert_eq!(p, init_params(dims, &ModelConfig::default(), 3).unwrap());
        assert_ne!(p, init_params(dims, &ModelConfig::default(), 4).unwrap());
        for w in [&p.fwd, &p.bwd] {
            assert!(w.b[8..16].iter().all(|&b| b == 1.0));
            assert!(w.b[..8].iter().chain(&w.b[16..]).all(|&b| b == 0.0));
            let gram = w.w_h.transpose();
            for i in 0..8 {
                for j in 0..8 {
                    let d = crate::matrix::dot(gram.row(i), gram.row(j));
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-12);
                }
            }
            let lim = (6.0f64 / (6 + 32) as f64).sqrt();
            assert!(w.w_x.as_slice().iter().all(|v| v.abs() <= lim));
        }
        assert!(p.context.iter().all(|u| u.abs() <= 0.1));
        assert!(p.att_b.iter().all(|&b| b == 0.0));
        assert_eq!(p.out_b, 0.0);
    }

    #[test]
    fn flat_round_trip() {
        let dims = ModelDims::new(3, 4, 5);
        let p = init_params(dims, &ModelConfig::default(), 9).unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), dims.param_count());
        assert_eq!(ModelParams::from_flat(dims, &flat).unwrap(), p);
        assert!(ModelParams::from_flat(dims, &flat[1..]).is_err());
        let mut q = p.clone();
        q.add_assign(&p);
        q.scale(0.5);
        assert_eq!(q, p);
    }
}
