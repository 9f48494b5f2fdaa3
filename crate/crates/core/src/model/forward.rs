use super::{HeadActivation, LstmWeights, ModelConfig, ModelParams, Pooling};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Post-activation gate values and resulting state of one LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTrace {
    /// `[i; f; g; o]`, each of length `H`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Steps of one direction in processing order (reversed time for the
/// backward direction).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    pub steps: Vec<GateTrace>,
}

/// Every intermediate of a forward pass that backpropagation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub fwd: LstmTrace,
    pub bwd: LstmTrace,
    /// `K × 2H`, row `t` is `[→h_t ; ←h_t]`.
    pub hidden: Matrix,
    /// `K × A` attention projections `tanh(W h_t + b)`; `K × 0` for mean pooling.
    pub att_v: Matrix,
    pub beta: Vec<f64>,
    pub q: Vec<f64>,
    /// Head output before the activation.
    pub pre_activation: f64,
    pub eta: f64,
}

/// One LSTM step with zero peepholes and a single bias per gate.
pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], w: &LstmWeights) -> Result<GateTrace> {
    let h = w.hidden_dim();
    if x.len() != w.w_x.cols() {
        return Err(Error::DimensionMismatch {
            context: "lstm input",
            expected: w.w_x.cols(),
            got: x.len(),
        });
    }
    if h_prev.len() != h || c_prev.len() != h {
        return Err(Error::DimensionMismatch {
            context: "lstm state",
            expected: h,
            got: h_prev.len().min(c_prev.len()),
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("lstm input"));
    }
    let mut z = w.b.clone();
    w.w_x.matvec_add(x, &mut z);
    w.w_h.matvec_add(h_prev, &mut z);
    for (k, v) in z.iter_mut().enumerate() {
        *v = if (2 * h..3 * h).contains(&k) {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
    let mut c = vec![0.0; h];
    let mut hn = vec![0.0; h];
    for j in 0..h {
        let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
        c[j] = f * c_prev[j] + i * g;
        hn[j] = o * c[j].tanh();
    }
    Ok(GateTrace { gates: z, c, h: hn })
}

fn run_direction(x: &Matrix, w: &LstmWeights, order: impl Iterator<Item = usize>) -> Result<LstmTrace> {
    let h = w.hidden_dim();
    let mut steps: Vec<GateTrace> = Vec::with_capacity(x.rows());
    let zero = vec![0.0; h];
    for t in order {
        let (hp, cp) = match steps.last() {
            Some(s) => (&s.h[..], &s.c[..]),
            None => (&zero[..], &zero[..]),
        };
        let s = lstm_step(x.row(t), hp, cp, w)?;
        steps.push(s);
    }
    Ok(LstmTrace { steps })
}

/// Runs both directions over a `K × D` window and returns the `K × 2H`
/// concatenated hidden states plus the per-direction traces.
pub fn bilstm_forward(x: &Matrix, params: &ModelParams) -> Result<(Matrix, LstmTrace, LstmTrace)> {
    let k = x.rows();
    if k == 0 {
        return Err(Error::invalid("window", "window must contain at least one frame"));
    }
    if x.cols() != params.dims.input_dim {
        return Err(Error::DimensionMismatch {
            context: "window features",
            expected: params.dims.input_dim,
            got: x.cols(),
        });
    }
    let h = params.dims.hidden_dim;
    let fwd = run_direction(x, &params.fwd, 0..k)?;
    let bwd = run_direction(x, &params.bwd, (0..k).rev())?;
    let mut hidden = Matrix::zeros(k, 2 * h);
    for t in 0..k {
        let row = hidden.row_mut(t);
        row[..h].copy_from_slice(&fwd.steps[t].h);
        row[h..].copy_from_slice(&bwd.steps[k - 1 - t].h);
    }
    Ok((hidden, fwd, bwd))
}

/// Pools the hidden states. Returns `(β, q, v)`.
pub fn attention_forward(hidden: &Matrix, params: &ModelParams, pooling: Pooling) -> (Vec<f64>, Vec<f64>, Matrix) {
    let (k, h2) = hidden.shape();
    let (beta, v) = match pooling {
        Pooling::Mean => (vec![1.0 / k as f64; k], Matrix::zeros(k, 0)),
        Pooling::Attention => {
            let a = params.dims.attn_dim;
            let mut v = Matrix::zeros(k, a);
            let mut scores = Vec::with_capacity(k);
            for t in 0..k {
                let row = v.row_mut(t);
                row.copy_from_slice(&params.att_b);
                params.att_w.matvec_add(hidden.row(t), row);
                row.iter_mut().for_each(|x| *x = x.tanh());
                scores.push(dot(row, &params.context));
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut beta: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = beta.iter().sum();
            beta.iter_mut().for_each(|b| *b /= z);
            (beta, v)
        }
    };
    let mut q = vec![0.0; h2];
    for (t, b) in beta.iter().enumerate() {
        crate::matrix::axpy(*b, hidden.row(t), &mut q);
    }
    (beta, q, v)
}

/// Returns `(pre_activation, η)`.
pub fn head_forward(q: &[f64], params: &ModelParams, head: HeadActivation) -> (f64, f64) {
    let a = dot(&params.out_w, q) + params.out_b;
    let eta = match head {
        HeadActivation::Linear => a,
        HeadActivation::Relu => a.max(0.0),
    };
    (a, eta)
}

pub fn model_forward(x: &Matrix, params: &ModelParams, config: &ModelConfig) -> Result<ForwardTrace> {
    let (hidden, fwd, bwd) = bilstm_forward(x, params)?;
    let (beta, q, att_v) = attention_forward(&hidden, params, config.pooling);
    let (pre_activation, eta) = head_forward(&q, params, config.head);
    if !eta.is_finite() {
        return Err(Error::NonFinite("model output"));
    }
    Ok(ForwardTrace {
        fwd,
        bwd,
        hidden,
        att_v,
        beta,
        q,
        pre_activation,
        eta,
    })
}

/// Scalar output `η` for one window.
pub fn predict(x: &Matrix, params: &ModelParams, config: &ModelConfig) -> Result<f64> {
    model_forward(x, params, config).map(|t| t.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn window(k: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(k, d, (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect())
    }

    #[test]
    fn scalar_lstm_step_by_hand() {
        // H = 1, D = 1; gates i,f,g,o with weights 0.5, 1.0, -1.0, 2.0
        let w = LstmWeights {
            w_x: Matrix::from_vec(4, 1, vec![0.5, 1.0, -1.0, 2.0]),
            w_h: Matrix::from_vec(4, 1, vec![0.1, 0.2, 0.3, 0.4]),
            b: vec![0.0, 1.0, 0.0, 0.0],
        };
        let s = lstm_step(&[0.8], &[0.5], &[-0.3], &w).unwrap();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = sig(0.4 + 0.05);
        let f = sig(0.8 + 0.1 + 1.0);
        let g = (-0.8f64 + 0.15).tanh();
        let o = sig(1.6 + 0.2);
        let c = f * -0.3 + i * g;
        assert!((s.c[0] - c).abs() < 1e-15);
        assert!((s.h[0] - o * c.tanh()).abs() < 1e-15);
        assert!(lstm_step(&[f64::NAN], &[0.5], &[0.0], &w).is_err());
        assert!(lstm_step(&[0.0, 1.0], &[0.5], &[0.0], &w).is_err());
    }

    #[test]
    fn zero_weights_give_zero_hidden() {
        let dims = ModelDims::new(3, 4, 5);
        let p = ModelParams::zeros(dims);
        let (h, _, _) = bilstm_forward(&window(5, 3, 1), &p).unwrap();
        // o = 0.5, c = 0.5·g = 0 with g = tanh(0)
        assert!(h.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_direction_sees_reversed_input() {
        let dims = ModelDims::new(2, 3, 6);
        let mut p = init_params(dims, &ModelConfig::default(), 5).unwrap();
        p.bwd = p.fwd.clone();
        let x = window(6, 2, 2);
        let mut rev = Matrix::zeros(6, 2);
        for t in 0..6 {
            rev.row_mut(t).copy_from_slice(x.row(5 - t));
        }
        let (h, _, _) = bilstm_forward(&x, &p).unwrap();
        let (hr, _, _) = bilstm_forward(&rev, &p).unwrap();
        for t in 0..6 {
            assert_eq!(&h.row(t)[3..], &hr.row(5 - t)[..3]);
        }
    }

    #[test]
    fn relu_head_is_nonnegative() {
        let dims = ModelDims::new(2, 3, 4);
        let mut p = init_params(dims, &ModelConfig::default(), 1).unwrap();
        p.out_b = -10.0;
        let relu = ModelConfig {
            head: HeadActivation::Relu,
            ..Default::default()
        };
        let t = model_forward(&window(4, 2, 3), &p, &relu).unwrap();
        assert_eq!(t.eta, 0.0);
        assert!(t.pre_activation < 0.0);
    }

    #[test]
    fn mean_pooling_averages() {
        let dims = ModelDims {
            attn_dim: 0,
            ..ModelDims::new(2, 3, 4)
        };
        let cfg = ModelConfig {
            pooling: Pooling::Mean,
            ..Default::default()
        };
        let p = init_params(dims, &cfg, 1).unwrap();
        let t = model_forward(&window(4, 2, 3), &p, &cfg).unwrap();
        for c in 0..6 {
            let m = t.hidden.column(c).iter().sum::<f64>() / 4.0;
            assert!((t.q[c] - m).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn attention_is_a_distribution(seed in 0u64..1000, k in 1usize..9) {
            let dims = ModelDims::new(3, 4, k);
            let p = init_params(dims, &ModelConfig::default(), seed).unwrap();
            let t = model_forward(&window(k, 3, seed + 1), &p, &ModelConfig::default()).unwrap();
            prop_assert!(t.beta.iter().all(|&b| b >= 0.0));
            prop_assert!((t.beta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for c in 0..8 {
                let col = t.hidden.column(c);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(t.q[c] >= lo - 1e-12 && t.q[c] <= hi + 1e-12);
            }
        }
    }
}
