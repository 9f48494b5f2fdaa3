//! Reverse-mode gradients of the squared error through the head, the
//! pooling layer and both LSTM directions.

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, Matrix};
use crate::model::{
    model_forward, ForwardTrace, HeadActivation, LstmTrace, LstmWeights, ModelConfig, ModelParams, Pooling,
};

/// Gradient accumulator, shaped like the parameters.
pub type GradientSet = ModelParams;

pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "mse inputs",
            expected: targets.len().max(1),
            got: predictions.len(),
        });
    }
    let s: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / predictions.len() as f64)
}

/// Backpropagates one direction. `d_hidden(s)` yields the upstream gradient
/// for processing step `s`; `input(s)` the frame fed at that step.
fn lstm_backward<'a>(
    trace: &LstmTrace,
    w: &LstmWeights,
    g: &mut LstmWeights,
    d_hidden: impl Fn(usize) -> &'a [f64],
    input: impl Fn(usize) -> &'a [f64],
) {
    let h = w.hidden_dim();
    let zero = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for s in (0..trace.steps.len()).rev() {
        let st = &trace.steps[s];
        let (h_prev, c_prev) = if s == 0 {
            (&zero[..], &zero[..])
        } else {
            (&trace.steps[s - 1].h[..], &trace.steps[s - 1].c[..])
        };
        let up = d_hidden(s);
        for j in 0..h {
            let (i, f, gg, o) = (st.gates[j], st.gates[h + j], st.gates[2 * h + j], st.gates[3 * h + j]);
            let dh = up[j] + dh_next[j];
            let tc = st.c[j].tanh();
            let d_o = dh * tc;
            let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
            dz[j] = dc * gg * i * (1.0 - i);
            dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - gg * gg);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        g.w_x.add_outer(&dz, input(s));
        g.w_h.add_outer(&dz, h_prev);
        axpy(1.0, &dz, &mut g.b);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        w.w_h.matvec_t_add(&dz, &mut dh_next);
    }
}

/// Accumulates `d(scale·(η − y)²)/dθ` for one window into `grads`, given its
/// forward trace. Returns the unscaled squared error.
pub fn backward_window(
    x: &Matrix,
    target: f64,
    trace: &ForwardTrace,
    params: &ModelParams,
    config: &ModelConfig,
    scale: f64,
    grads: &mut GradientSet,
) -> f64 {
    let err = trace.eta - target;
    let d_eta = 2.0 * err * scale;
    let da = match config.head {
        HeadActivation::Linear => d_eta,
        HeadActivation::Relu if trace.pre_activation > 0.0 => d_eta,
        HeadActivation::Relu => 0.0,
    };
    grads.out_b += da;
    axpy(da, &trace.q, &mut grads.out_w);
    let dq: Vec<f64> = params.out_w.iter().map(|w| da * w).collect();

    let (k, h2) = trace.hidden.shape();
    let h = h2 / 2;
    let mut d_hidden = Matrix::zeros(k, h2);
    match config.pooling {
        Pooling::Mean => {
            for t in 0..k {
                axpy(1.0 / k as f64, &dq, d_hidden.row_mut(t));
            }
        }
        Pooling::Attention => {
            let d_beta: Vec<f64> = (0..k).map(|t| dot(&dq, trace.hidden.row(t))).collect();
            let avg: f64 = trace.beta.iter().zip(&d_beta).map(|(b, d)| b * d).sum();
            let mut du = vec![0.0; params.dims.attn_dim];
            for t in 0..k {
                let row = d_hidden.row_mut(t);
                axpy(trace.beta[t], &dq, row);
                let ds = trace.beta[t] * (d_beta[t] - avg);
                let v = trace.att_v.row(t);
                axpy(ds, v, &mut grads.context);
                for ((u, &vi), &ci) in du.iter_mut().zip(v).zip(&params.context) {
                    *u = ds * ci * (1.0 - vi * vi);
                }
                grads.att_w.add_outer(&du, trace.hidden.row(t));
                axpy(1.0, &du, &mut grads.att_b);
                params.att_w.matvec_t_add(&du, row);
            }
        }
    }

    lstm_backward(
        &trace.fwd,
        &params.fwd,
        &mut grads.fwd,
        |s| &d_hidden.row(s)[..h],
        |s| x.row(s),
    );
    lstm_backward(
        &trace.bwd,
        &params.bwd,
        &mut grads.bwd,
        |s| &d_hidden.row(k - 1 - s)[h..],
        |s| x.row(k - 1 - s),
    );
    err * err
}

/// Mean squared error over a batch and its exact gradient.
pub fn backward(
    windows: &[&Matrix],
    targets: &[f64],
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(f64, GradientSet)> {
    if windows.is_empty() || windows.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "batch targets",
            expected: windows.len().max(1),
            got: targets.len(),
        });
    }
    let scale = 1.0 / windows.len() as f64;
    let mut grads = params.zeros_like();
    let mut scratch = params.zeros_like();
    let mut loss = 0.0;
    for (x, &y) in windows.iter().zip(targets) {
        let trace = model_forward(x, params, config)?;
        scratch.scale(0.0);
        loss += backward_window(x, y, &trace, params, config, scale, &mut scratch);
        grads.add_assign(&scratch);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss"));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims};
    use rand::{Rng, SeedableRng};

    fn batch(n: usize, k: usize, d: usize, seed: u64) -> (Vec<Matrix>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let xs = (0..n)
            .map(|_| Matrix::from_vec(k, d, (0..k * d).map(|_| rng.random_range(-1.5..1.5)).collect()))
            .collect();
        let ys = (0..n).map(|i| [1.0, -1.0, 0.0][i % 3]).collect();
        (xs, ys)
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[1.0, -1.0], &[-1.0, 1.0]).unwrap(), 4.0);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_error_gives_zero_head_bias_gradient() {
        let dims = ModelDims::new(3, 4, 5);
        let cfg = ModelConfig::default();
        let p = init_params(dims, &cfg, 2).unwrap();
        let (xs, _) = batch(4, 5, 3, 9);
        let refs: Vec<&Matrix> = xs.iter().collect();
        let ys: Vec<f64> = xs.iter().map(|x| model_forward(x, &p, &cfg).unwrap().eta).collect();
        let (loss, g) = backward(&refs, &ys, &p, &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.out_b, 0.0);
        assert_eq!(g.l2_norm(), 0.0);
    }

    #[test]
    fn duplicated_batch_has_same_mean_gradient() {
        let dims = ModelDims::new(2, 3, 3);
        let cfg = ModelConfig::default();
        let p = init_params(dims, &cfg, 4).unwrap();
        let (xs, ys) = batch(3, 3, 2, 1);
        let refs: Vec<&Matrix> = xs.iter().collect();
        let (l1, g1) = backward(&refs, &ys, &p, &cfg).unwrap();
        let refs2: Vec<&Matrix> = xs.iter().chain(&xs).collect();
        let ys2: Vec<f64> = ys.iter().chain(&ys).cloned().collect();
        let (l2, g2) = backward(&refs2, &ys2, &p, &cfg).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    fn max_rel_error(dims: ModelDims, cfg: ModelConfig, seed: u64) -> f64 {
        let p = init_params(dims, &cfg, seed).unwrap();
        let (xs, ys) = batch(3, dims.seq_len, dims.input_dim, seed + 100);
        let refs: Vec<&Matrix> = xs.iter().collect();
        let (_, g) = backward(&refs, &ys, &p, &cfg).unwrap();
        let flat = p.to_flat();
        let loss_at = |f: &[f64]| {
            let q = ModelParams::from_flat(dims, f).unwrap();
            let preds: Vec<f64> = xs.iter().map(|x| model_forward(x, &q, &cfg).unwrap().eta).collect();
            mse_loss(&preds, &ys).unwrap()
        };
        let mut worst = 0.0f64;
        let mut f = flat.clone();
        for (i, a) in g.to_flat().into_iter().enumerate() {
            f[i] = flat[i] + 1e-5;
            let up = loss_at(&f);
            f[i] = flat[i] - 1e-5;
            let down = loss_at(&f);
            f[i] = flat[i];
            let n = (up - down) / 2e-5;
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
        worst
    }

    #[test]
    fn gradient_check_attention() {
        let e = max_rel_error(ModelDims::new(3, 4, 5), ModelConfig::default(), 7);
        assert!(e < 1e-4, "max relative error {e}");
    }

    #[test]
    fn gradient_check_mean_pooling_and_relu() {
        let dims = ModelDims {
            attn_dim: 0,
            ..ModelDims::new(2, 3, 4)
        };
        let cfg = ModelConfig {
            pooling: Pooling::Mean,
            ..Default::default()
        };
        assert!(max_rel_error(dims, cfg, 3) < 1e-4);
        let relu = ModelConfig {
            head: HeadActivation::Relu,
            ..Default::default()
        };
        assert!(max_rel_error(ModelDims::new(2, 3, 3), relu, 5) < 1e-4);
    }
}
