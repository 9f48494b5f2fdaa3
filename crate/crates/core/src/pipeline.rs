//! End-to-end runs: data, features, training, inference and scoring.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{FrameConfig, RunConfig, SyntheticSetConfig};
use crate::decode::{
    confusion, decode, frame_labels, inference_windows, make_windows, match_events, metrics, ConfusionCounts,
    DecodeConfig, Decoded, EventCounts, EventReport, MetricReport, SegmentLabel, SegmentRow, WindowExample,
};
use crate::dsp::FrameGrid;
use crate::error::{Error, Result};
use crate::features::{extract, FeatureKind, FeatureSequence, FeatureSpec, NormStats};
use crate::matrix::Matrix;
use crate::model::{init_params, Checkpoint, ModelConfig, ModelParams};
use crate::signal::{split_dataset, synth_pcg, HeartState, PcgRecording, SynthConfig};
use crate::training::{augment_noise, predict_batch, train, EpochRecord, NoiseStage, TrainConfig};

/// Independent RNG streams derived from a run's master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedStream {
    Data = 1,
    Split = 2,
    Init = 3,
    Batches = 4,
    Noise = 5,
}

pub fn derive_seed(master: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

/// `n_recordings` synthetic recordings with heart rates drawn uniformly
/// from `[bpm_min, bpm_max]`.
pub fn synthetic_recordings(cfg: &SyntheticSetConfig, seed: u64) -> Result<Vec<PcgRecording>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.n_recordings)
        .map(|i| {
            let bpm = if cfg.bpm_max > cfg.bpm_min {
                rng.random_range(cfg.bpm_min..=cfg.bpm_max)
            } else {
                cfg.bpm_min
            };
            let rec_seed = rng.next_u64();
            synth_pcg(&SynthConfig {
                bpm,
                duration_s: cfg.duration_s,
                sample_rate_hz: cfg.sample_rate_hz,
                noise_snr_db: cfg.snr_db.is_finite().then_some(cfg.snr_db),
                rng_seed: rec_seed,
                ..Default::default()
            })
            .and_then(|r| r.with_samples(format!("rec-{i:03}"), r.samples().to_vec()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<PcgRecording>,
    pub val: Vec<PcgRecording>,
    pub test: Vec<PcgRecording>,
}

impl DatasetSplit {
    pub fn new(recordings: &[PcgRecording], cfg: &RunConfig) -> Result<Self> {
        let (train, val, test) =
            split_dataset(recordings, cfg.data.ratios(), derive_seed(cfg.seed, SeedStream::Split))?;
        Ok(DatasetSplit { train, val, test })
    }

    /// The synthetic corpus of `cfg.data.synthetic`, split.
    pub fn synthetic(cfg: &RunConfig) -> Result<Self> {
        let recs = synthetic_recordings(&cfg.data.synthetic, derive_seed(cfg.seed, SeedStream::Data))?;
        Self::new(&recs, cfg)
    }
}

/// Everything needed to turn a recording into model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturePipeline {
    pub spec: FeatureSpec,
    pub frames: FrameConfig,
    pub window_frames: usize,
    pub norm: NormStats,
}

impl FeaturePipeline {
    pub fn raw_features(spec: &FeatureSpec, frames: &FrameConfig, rec: &PcgRecording) -> Result<FeatureSequence> {
        extract(rec, spec, frames.win_ms, frames.shift_ms)
    }

    /// Normalised features of one recording.
    pub fn features(&self, rec: &PcgRecording) -> Result<FeatureSequence> {
        self.norm.apply(&Self::raw_features(&self.spec, &self.frames, rec)?)
    }

    /// Labelled windows of one recording.
    pub fn windows(&self, rec: &PcgRecording) -> Result<Vec<WindowExample>> {
        let seq = self.features(rec)?;
        make_windows(&seq, &frame_labels(rec, &seq.grid), self.window_frames)
    }

    /// Sample index (in the recording) of each window's centre frame.
    pub fn window_centers(&self, grid: &FrameGrid, recording_rate_hz: u32, n_windows: usize) -> Vec<usize> {
        (0..n_windows)
            .map(|w| {
                crate::decode::grid_to_recording_sample(
                    grid.frame_center(w + self.window_frames / 2),
                    grid,
                    recording_rate_hz,
                )
            })
            .collect()
    }
}

/// A trained network together with its input pipeline and decoder settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub model: ModelConfig,
    pub pipeline: FeaturePipeline,
    pub decode: DecodeConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    pipeline: FeaturePipeline,
    decode: DecodeConfig,
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::to_value(CheckpointMeta {
            pipeline: self.pipeline.clone(),
            decode: self.decode,
        })?;
        Ok(Checkpoint::new(&self.params, self.model, meta))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(ck.metadata.clone())
            .map_err(|e| Error::Checkpoint(format!("pipeline metadata: {e}")))?;
        let params = ck.params()?;
        if meta.pipeline.spec.dim() != params.dims.input_dim {
            return Err(Error::Checkpoint(format!(
                "feature spec yields {} columns but the model expects {}",
                meta.pipeline.spec.dim(),
                params.dims.input_dim
            )));
        }
        Ok(TrainedModel {
            params,
            model: ck.model,
            pipeline: meta.pipeline,
            decode: meta.decode,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn noisy_copy(rec: &PcgRecording, snr_db: f64, rng: &mut ChaCha8Rng) -> Result<PcgRecording> {
    let noisy = augment_noise(rec.samples(), Some(snr_db), rng);
    rec.with_samples(format!("{}+noise", rec.id()), noisy)
}

/// Extracts features, fits normalisation on the training recordings,
/// augments, and trains.
pub fn train_run(cfg: &RunConfig, data: &DatasetSplit) -> Result<RunOutcome> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::invalid(
            "dataset",
            "need at least one training and one validation recording",
        ));
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedStream::Noise));
    let raw = |r: &PcgRecording| FeaturePipeline::raw_features(&cfg.features, &cfg.frames, r);
    let train_raw: Vec<FeatureSequence> = data.train.iter().map(raw).collect::<Result<_>>()?;
    let norm = NormStats::fit(&train_raw)?;
    let pipeline = FeaturePipeline {
        spec: cfg.features.clone(),
        frames: cfg.frames,
        window_frames: cfg.model.window_frames,
        norm,
    };
    let labelled = |rec: &PcgRecording, seq: &FeatureSequence| -> Result<Vec<WindowExample>> {
        let z = pipeline.norm.apply(seq)?;
        make_windows(&z, &frame_labels(rec, &z.grid), pipeline.window_frames)
    };

    let mut train_windows = Vec::new();
    for (rec, seq) in data.train.iter().zip(&train_raw) {
        train_windows.extend(labelled(rec, seq)?);
    }
    if let Some(snr) = cfg.train.noise() {
        match cfg.train.noise_stage {
            NoiseStage::Raw => {
                for rec in &data.train {
                    let aug = noisy_copy(rec, snr, &mut noise_rng)?;
                    train_windows.extend(labelled(&aug, &raw(&aug)?)?);
                }
            }
            NoiseStage::Features => {
                let copies: Vec<WindowExample> = train_windows
                    .iter()
                    .map(|w| {
                        let (k, d) = w.features.shape();
                        let f = augment_noise(w.features.as_slice(), Some(snr), &mut noise_rng);
                        WindowExample {
                            features: Matrix::from_vec(k, d, f),
                            ..w.clone()
                        }
                    })
                    .collect();
                train_windows.extend(copies);
            }
        }
    }
    let mut val_windows = Vec::new();
    for rec in &data.val {
        val_windows.extend(pipeline.windows(rec)?);
    }

    let model_cfg = cfg.model.config();
    let dims = cfg.model.dims(cfg.features.dim());
    let params = init_params(dims, &model_cfg, derive_seed(cfg.seed, SeedStream::Init))?;
    let tc = TrainConfig {
        seed: derive_seed(cfg.seed, SeedStream::Batches),
        ..cfg.train.clone()
    };
    let out = train(&train_windows, &val_windows, params, &model_cfg, &tc)?;
    Ok(RunOutcome {
        model: TrainedModel {
            params: out.params,
            model: model_cfg,
            pipeline,
            decode: cfg.decode,
        },
        history: out.history,
        best_epoch: out.best_epoch,
    })
}

/// Model output and decoded segmentation of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub recording_id: String,
    pub grid: FrameGrid,
    pub eta: Vec<f64>,
    pub center_samples: Vec<usize>,
    pub decoded: Decoded,
    /// `(start_sample, end_sample, label)` in recording samples.
    pub events: Vec<(usize, usize, SegmentLabel)>,
}

impl Segmentation {
    pub fn rows(&self) -> Vec<SegmentRow> {
        self.eta
            .iter()
            .enumerate()
            .map(|(i, &eta)| SegmentRow {
                window_index: i,
                center_sample: self.center_samples[i],
                eta,
                label: self.decoded.labels[i],
            })
            .collect()
    }
}

pub fn segment(model: &TrainedModel, rec: &PcgRecording) -> Result<Segmentation> {
    let seq = model.pipeline.features(rec)?;
    let windows = inference_windows(&seq, model.pipeline.window_frames)?;
    let refs: Vec<&Matrix> = windows.iter().collect();
    let eta = predict_batch(&refs, &model.params, &model.model)?;
    let decoded = decode(&eta, &model.decode, seq.grid.shift_ms())?;
    let k = model.pipeline.window_frames;
    let events = decoded
        .events
        .iter()
        .map(|e| {
            let (s, t) = e.sample_span(k, &seq.grid, rec.sample_rate_hz());
            (s, t, e.label)
        })
        .collect();
    Ok(Segmentation {
        recording_id: rec.id().to_string(),
        center_samples: model
            .pipeline
            .window_centers(&seq.grid, rec.sample_rate_hz(), eta.len()),
        grid: seq.grid,
        eta,
        decoded,
        events,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingScore {
    pub recording_id: String,
    pub n_windows: usize,
    pub counts: ConfusionCounts,
    pub acc: Option<f64>,
    pub f1: Option<f64>,
}

/// Window-level scores (primary) and event-level scores (secondary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub window: MetricReport,
    pub events: EventReport,
    pub recordings: Vec<RecordingScore>,
}

fn reference_events(rec: &PcgRecording) -> Vec<(usize, usize, SegmentLabel)> {
    rec.annotations()
        .iter()
        .filter(|a| matches!(a.state, HeartState::S1 | HeartState::S2))
        .map(|a| (a.start_sample, a.end_sample, a.state.into()))
        .collect()
}

pub fn evaluate(model: &TrainedModel, recordings: &[PcgRecording]) -> Result<EvalReport> {
    if recordings.is_empty() {
        return Err(Error::invalid("test set", "no recordings to evaluate"));
    }
    let mut total = ConfusionCounts::default();
    let mut ev = EventCounts::default();
    let mut per = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let seg = segment(model, rec)?;
        let labels = frame_labels(rec, &seg.grid);
        let k = model.pipeline.window_frames;
        let truth = &labels[k / 2..k / 2 + seg.eta.len()];
        let c = confusion(&seg.decoded.labels, truth)?;
        total.add(&c);
        let collar = model.decode.event_collar_ms * rec.sample_rate_hz() as f64 / 1000.0;
        ev.add(&match_events(&reference_events(rec), &seg.events, collar));
        let m = metrics(c);
        per.push(RecordingScore {
            recording_id: rec.id().to_string(),
            n_windows: seg.eta.len(),
            counts: c,
            acc: m.acc,
            f1: m.f1,
        });
    }
    Ok(EvalReport {
        window: metrics(total),
        events: ev.report(),
        recordings: per,
    })
}

/// One line of the feature-combination study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStudyRow {
    pub name: String,
    pub components: Vec<FeatureKind>,
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub acc: Vec<f64>,
    pub f1: Vec<f64>,
}

impl FeatureStudyRow {
    pub fn mean_acc(&self) -> f64 {
        self.acc.iter().sum::<f64>() / self.acc.len().max(1) as f64
    }

    pub fn mean_f1(&self) -> f64 {
        self.f1.iter().sum::<f64>() / self.f1.len().max(1) as f64
    }
}

/// Trains and scores one model per (feature combination, seed). The data
/// split follows each seed, so every row sees the same recordings for a
/// given seed.
pub fn feature_study(
    base: &RunConfig,
    rows: &[(&str, Vec<FeatureKind>)],
    seeds: &[u64],
    mut on_result: impl FnMut(&str, u64, &EvalReport),
) -> Result<Vec<FeatureStudyRow>> {
    let mut out: Vec<FeatureStudyRow> = rows
        .iter()
        .map(|(name, comps)| FeatureStudyRow {
            name: (*name).to_string(),
            components: comps.clone(),
            dim: FeatureSpec::with_components(comps.clone()).dim(),
            seeds: seeds.to_vec(),
            acc: Vec::new(),
            f1: Vec::new(),
        })
        .collect();
    for &seed in seeds {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let data = DatasetSplit::synthetic(&cfg)?;
        for (row, (name, comps)) in out.iter_mut().zip(rows) {
            cfg.features.components = comps.clone();
            let run = train_run(&cfg, &data)?;
            let report = evaluate(&run.model, &data.test)?;
            on_result(name, seed, &report);
            row.acc.push(report.window.acc.unwrap_or(0.0));
            row.f1.push(report.window.f1.unwrap_or(0.0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::SegmentLabel;

    fn tiny() -> RunConfig {
        let mut c = RunConfig::default();
        c.data.synthetic.n_recordings = 5;
        c.data.synthetic.duration_s = 4.0;
        c.data.train_fraction = 0.6;
        c.data.val_fraction = 0.2;
        c.data.test_fraction = 0.2;
        c.model.hidden_dim = 6;
        c.train.epochs_phase1 = 2;
        c.train.epochs_phase2 = 1;
        c.train.windows_per_epoch = 128;
        c.train.val_max_windows = 64;
        c
    }

    #[test]
    fn seed_streams_differ() {
        assert_ne!(derive_seed(1, SeedStream::Data), derive_seed(1, SeedStream::Split));
        assert_ne!(derive_seed(1, SeedStream::Data), derive_seed(2, SeedStream::Data));
        assert_eq!(derive_seed(1, SeedStream::Init), derive_seed(1, SeedStream::Init));
    }

    #[test]
    fn synthetic_corpus() {
        let cfg = SyntheticSetConfig {
            n_recordings: 6,
            duration_s: 3.0,
            ..Default::default()
        };
        let a = synthetic_recordings(&cfg, 4).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, synthetic_recordings(&cfg, 4).unwrap());
        let ids: std::collections::HashSet<_> = a.iter().map(|r| r.id().to_string()).collect();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn tiny_run_round_trips_through_a_checkpoint() {
        let cfg = tiny();
        let data = DatasetSplit::synthetic(&cfg).unwrap();
        assert_eq!((data.train.len(), data.val.len(), data.test.len()), (3, 1, 1));
        let run = train_run(&cfg, &data).unwrap();
        assert_eq!(run.history.len(), 3);
        let ck = run.model.to_checkpoint().unwrap();
        let back = TrainedModel::from_checkpoint(&Checkpoint::from_json(&ck.to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(back, run.model);

        let rec = &data.test[0];
        let seg = segment(&back, rec).unwrap();
        let seq = back.pipeline.features(rec).unwrap();
        assert_eq!(seg.eta.len(), seq.n_frames() - 6);
        assert_eq!(seg.rows().len(), seg.eta.len());
        assert!(seg.events.iter().all(|e| e.2 != SegmentLabel::None && e.0 < e.1));

        let report = evaluate(&back, &data.test).unwrap();
        assert_eq!(report.recordings.len(), 1);
        assert!(evaluate(&back, &[]).is_err());
    }

    #[test]
    fn oracle_model_scores_perfectly() {
        // A model whose output is the centre frame's first column, fed
        // features equal to the label targets.
        let cfg = tiny();
        let data = DatasetSplit::synthetic(&cfg).unwrap();
        let rec = &data.test[0];
        let seq = FeaturePipeline::raw_features(&cfg.features, &cfg.frames, rec).unwrap();
        let labels = frame_labels(rec, &seq.grid);
        let truth: Vec<SegmentLabel> = labels[3..labels.len() - 3].to_vec();
        let dec = DecodeConfig {
            min_dur_ms: 0.0,
            ..Default::default()
        };
        let eta: Vec<f64> = truth.iter().map(|l| l.target()).collect();
        let d = decode(&eta, &dec, 20.0).unwrap();
        let m = metrics(confusion(&d.labels, &truth).unwrap());
        assert!([m.ppv, m.se, m.spe, m.acc, m.f1].iter().all(|v| *v == Some(1.0)));
    }
}
