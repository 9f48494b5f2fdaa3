//! Mini-batch training with Adam and a two-phase learning rate.

mod adam;
mod backward;
mod noise;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{confusion, metrics, DecodeConfig, SegmentLabel, WindowExample};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{model_forward, ModelConfig, ModelParams};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::{backward, backward_window, mse_loss, GradientSet};
pub use noise::augment_noise;

/// Where augmentation noise is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseStage {
    /// Onto the raw waveform, before feature extraction.
    #[default]
    Raw,
    /// Onto the extracted (normalised) feature windows.
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_phase1: f64,
    pub epochs_phase1: usize,
    pub lr_phase2: f64,
    pub epochs_phase2: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm cap; `inf` disables clipping.
    pub clip_norm: f64,
    /// SNR of the augmentation copy of each training recording; `inf`
    /// disables augmentation.
    pub noise_snr_db: f64,
    pub noise_stage: NoiseStage,
    /// Windows drawn (without replacement) per epoch; 0 uses every
    /// training window.
    pub windows_per_epoch: usize,
    /// Evenly spaced validation windows scored per epoch; 0 scores all.
    pub val_max_windows: usize,
    /// Batch-order seed. Not part of the config file: runs derive it from
    /// their master seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr_phase1: 0.002,
            epochs_phase1: 30,
            lr_phase2: 0.0002,
            epochs_phase2: 70,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            noise_snr_db: 15.0,
            noise_stage: NoiseStage::Raw,
            windows_per_epoch: 0,
            val_max_windows: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if self.epochs_phase1 + self.epochs_phase2 == 0 {
            return Err(Error::invalid("epochs", "need at least one epoch"));
        }
        if !(self.lr_phase1 > 0.0 && self.lr_phase2 > 0.0) {
            return Err(Error::invalid("learning rate", "rates must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip_norm", "must be positive (inf disables clipping)"));
        }
        if self.noise_snr_db.is_nan() || self.noise_snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("noise_snr_db", "must be a number or inf"));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_phase1 + self.epochs_phase2
    }

    /// Augmentation SNR, `None` when disabled.
    pub fn noise(&self) -> Option<f64> {
        self.noise_snr_db.is_finite().then_some(self.noise_snr_db)
    }

    /// `(phase, lr)` for a 1-based epoch.
    pub fn schedule(&self, epoch: usize) -> (u8, f64) {
        if epoch <= self.epochs_phase1 {
            (1, self.lr_phase1)
        } else {
            (2, self.lr_phase2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: u8,
    pub lr: f64,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the highest validation accuracy
    /// (earliest on ties).
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Worker threads to use: `PCGSEG_THREADS` if set to a positive integer,
/// otherwise the machine's available parallelism.
pub fn thread_count() -> usize {
    std::env::var("PCGSEG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a pool of `threads` workers, or inline for one thread.
fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Mean loss and gradient of a batch. Each window's gradient is computed on
/// its own and the results are summed in batch order, so the answer does
/// not depend on the number of threads.
fn batch_gradient(
    batch: &[&WindowExample],
    params: &ModelParams,
    config: &ModelConfig,
    parallel: bool,
) -> Result<(f64, GradientSet)> {
    let scale = 1.0 / batch.len() as f64;
    let one = |w: &WindowExample, g: &mut GradientSet| -> Result<f64> {
        let trace = model_forward(&w.features, params, config)?;
        Ok(backward_window(&w.features, w.target, &trace, params, config, scale, g))
    };
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    if parallel {
        let parts: Vec<(f64, GradientSet)> = batch
            .par_iter()
            .map(|w| {
                let mut g = params.zeros_like();
                one(w, &mut g).map(|e| (e, g))
            })
            .collect::<Result<_>>()?;
        for (e, g) in &parts {
            loss += e;
            grads.add_assign(g);
        }
    } else {
        let mut g = params.zeros_like();
        for w in batch {
            g.scale(0.0);
            loss += one(w, &mut g)?;
            grads.add_assign(&g);
        }
    }
    Ok((loss * scale, grads))
}

/// `η` for every window.
pub fn predict_batch(windows: &[&Matrix], params: &ModelParams, config: &ModelConfig) -> Result<Vec<f64>> {
    let threads = thread_count();
    with_pool(threads, || {
        if threads > 1 {
            windows
                .par_iter()
                .map(|x| model_forward(x, params, config).map(|t| t.eta))
                .collect()
        } else {
            windows
                .iter()
                .map(|x| model_forward(x, params, config).map(|t| t.eta))
                .collect()
        }
    })
}

/// Window-level accuracy under the default thresholds, without duration
/// clean-up.
pub fn window_accuracy(windows: &[&WindowExample], params: &ModelParams, config: &ModelConfig) -> Result<f64> {
    let xs: Vec<&Matrix> = windows.iter().map(|w| &w.features).collect();
    let eta = predict_batch(&xs, params, config)?;
    let dec = DecodeConfig::default();
    let pred: Vec<SegmentLabel> = eta.iter().map(|&e| dec.classify(e)).collect();
    let truth: Vec<SegmentLabel> = windows.iter().map(|w| w.label).collect();
    Ok(metrics(confusion(&pred, &truth)?).acc.unwrap_or(0.0))
}

fn clip(grads: &mut GradientSet, max_norm: f64) {
    let n = grads.l2_norm();
    if n > max_norm {
        grads.scale(max_norm / n);
    }
}

pub fn train(
    train_set: &[WindowExample],
    val_set: &[WindowExample],
    params: ModelParams,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.dims.validate(model.pooling)?;
    if train_set.is_empty() {
        return Err(Error::invalid("train set", "no training windows"));
    }
    if val_set.is_empty() {
        return Err(Error::invalid("validation set", "no validation windows"));
    }
    let d = params.dims.input_dim;
    if let Some(w) = train_set.iter().chain(val_set).find(|w| w.features.cols() != d) {
        return Err(Error::DimensionMismatch {
            context: "window features",
            expected: d,
            got: w.features.cols(),
        });
    }

    let val: Vec<&WindowExample> = if config.val_max_windows == 0 || config.val_max_windows >= val_set.len() {
        val_set.iter().collect()
    } else {
        let m = config.val_max_windows;
        (0..m).map(|i| &val_set[i * val_set.len() / m]).collect()
    };

    let threads = thread_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(7);
    let mut params = params;
    let mut adam = AdamState::new(&params);
    let mut best = (params.clone(), 0usize, f64::NEG_INFINITY);
    let mut history = Vec::with_capacity(config.total_epochs());
    let n = train_set.len();

    for epoch in 1..=config.total_epochs() {
        let (phase, lr) = config.schedule(epoch);
        let order: Vec<usize> = if config.windows_per_epoch == 0 || config.windows_per_epoch >= n {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            o
        } else {
            index::sample(&mut rng, n, config.windows_per_epoch).into_vec()
        };
        let epoch_start = params.clone();
        let diverged = |loss: f64| Error::Diverged {
            epoch,
            loss,
            last_good: Box::new(epoch_start.clone()),
        };
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&WindowExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grads) = match with_pool(threads, || batch_gradient(&batch, &params, model, threads > 1)) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(diverged(f64::NAN)),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(diverged(loss));
            }
            if config.clip_norm.is_finite() {
                clip(&mut grads, config.clip_norm);
            }
            adam_step(&mut params, &grads, &mut adam, lr, &config.adam);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        if !params.is_finite() {
            return Err(diverged(train_loss));
        }
        let val_acc = match window_accuracy(&val, &params, model) {
            Ok(a) => a,
            Err(Error::NonFinite(_)) => return Err(diverged(train_loss)),
            Err(e) => return Err(e),
        };
        log::info!("epoch {epoch} phase {phase} lr {lr} loss {train_loss:.5} val_acc {val_acc:.4}");
        history.push(EpochRecord {
            epoch,
            phase,
            lr,
            train_loss,
            val_acc,
        });
        if val_acc > best.2 {
            best = (params.clone(), epoch, val_acc);
        }
    }
    Ok(TrainOutcome {
        params: best.0,
        history,
        best_epoch: best.1,
    })
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut s = String::from("epoch,phase,lr,train_loss,val_acc\n");
    for r in history {
        writeln!(s, "{},{},{},{},{}", r.epoch, r.phase, r.lr, r.train_loss, r.val_acc).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims};
    use rand::Rng;

    /// Windows whose label is the sign of the centre frame's first feature.
    fn toy(n: usize, seed: u64) -> Vec<WindowExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = [SegmentLabel::S1, SegmentLabel::S2, SegmentLabel::None][i % 3];
                let mut f = Matrix::from_vec(5, 2, (0..10).map(|_| rng.random_range(-0.3..0.3)).collect());
                f.set(2, 0, label.target() + rng.random_range(-0.2..0.2));
                WindowExample {
                    features: f,
                    target: label.target(),
                    label,
                    center_frame: i,
                    recording_id: "toy".into(),
                }
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs_phase1: 10,
            epochs_phase2: 10,
            ..Default::default()
        }
    }

    #[test]
    fn learns_a_toy_problem_deterministically() {
        let dims = ModelDims::new(2, 16, 5);
        let cfg = ModelConfig::default();
        let (tr, va) = (toy(200, 1), toy(60, 2));
        let p = init_params(dims, &cfg, 0).unwrap();
        let out = train(&tr, &va, p.clone(), &cfg, &quick()).unwrap();
        let h = &out.history;
        assert_eq!(h.len(), 20);
        assert!(h.last().unwrap().train_loss < h[0].train_loss);
        let mut best = f64::INFINITY;
        let mut improved = 0;
        for r in h {
            if r.train_loss < best {
                best = r.train_loss;
                improved += 1;
            }
        }
        assert!(improved > 1);
        assert_eq!((h[0].phase, h[0].lr), (1, 0.002));
        assert_eq!((h[15].phase, h[15].lr), (2, 0.0002));
        let again = train(&tr, &va, p, &cfg, &quick()).unwrap();
        assert_eq!(again.history, out.history);
        assert_eq!(again.params, out.params);
        let best_acc = h.iter().map(|r| r.val_acc).fold(0.0, f64::max);
        assert_eq!(h[out.best_epoch - 1].val_acc, best_acc);
    }

    #[test]
    fn subsampled_epochs() {
        let dims = ModelDims::new(2, 4, 5);
        let cfg = ModelConfig::default();
        let tc = TrainConfig {
            epochs_phase1: 2,
            epochs_phase2: 1,
            windows_per_epoch: 40,
            val_max_windows: 10,
            ..Default::default()
        };
        let out = train(
            &toy(100, 1),
            &toy(30, 2),
            init_params(dims, &cfg, 0).unwrap(),
            &cfg,
            &tc,
        )
        .unwrap();
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn preconditions() {
        let dims = ModelDims::new(2, 4, 5);
        let cfg = ModelConfig::default();
        let p = init_params(dims, &cfg, 0).unwrap();
        assert!(train(&toy(10, 1), &[], p.clone(), &cfg, &quick()).is_err());
        assert!(train(&[], &toy(10, 1), p.clone(), &cfg, &quick()).is_err());
        let bad = TrainConfig {
            lr_phase1: 0.0,
            ..quick()
        };
        assert!(train(&toy(10, 1), &toy(10, 2), p, &cfg, &bad).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let dims = ModelDims::new(2, 4, 5);
        let cfg = ModelConfig::default();
        let mut p = init_params(dims, &cfg, 0).unwrap();
        p.out_b = f64::INFINITY;
        match train(&toy(10, 1), &toy(10, 2), p, &cfg, &quick()) {
            Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn history_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rec = EpochRecord {
            epoch: 1,
            phase: 1,
            lr: 0.002,
            train_loss: 0.5,
            val_acc: 0.75,
        };
        write_history_csv(&path, &[rec]).unwrap();
        assert_eq!(
            std::fs::read_to_string(path).unwrap(),
            "epoch,phase,lr,train_loss,val_acc\n1,1,0.002,0.5,0.75\n"
        );
    }
}
