use pcgseg::config::RunConfig;
use pcgseg::decode::{confusion, decode, frame_labels, metrics, DecodeConfig, SegmentLabel};
use pcgseg::dsp::FrameGrid;
use pcgseg::model::Checkpoint;
use pcgseg::pipeline::{evaluate, segment, train_run, DatasetSplit, TrainedModel};
use pcgseg::signal::{
    intervals_from_states, load_dir, synth_pcg, write_annotations, write_wav, HeartState, SynthConfig,
};

fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = 5;
    cfg.data.synthetic.n_recordings = 8;
    cfg.data.synthetic.duration_s = 4.0;
    cfg.model.hidden_dim = 6;
    cfg.model.window_frames = 5;
    cfg.train.epochs_phase1 = 2;
    cfg.train.epochs_phase2 = 1;
    cfg.train.windows_per_epoch = 128;
    cfg.train.val_max_windows = 128;
    cfg
}

fn runs(labels: &[SegmentLabel], which: SegmentLabel) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| l == which && (i == 0 || labels[i - 1] != which))
        .count()
}

#[test]
fn annotations_survive_state_and_frame_round_trips() {
    for bpm in [50.0, 75.0, 120.0] {
        let rec = synth_pcg(&SynthConfig {
            bpm,
            duration_s: 10.0,
            rng_seed: 3,
            ..Default::default()
        })
        .unwrap();
        let states: Vec<HeartState> = (0..rec.samples().len()).map(|s| rec.state_at(s)).collect();
        assert_eq!(intervals_from_states(&states), rec.annotations());

        let grid = FrameGrid::new(rec.samples().len(), rec.sample_rate_hz(), 80.0, 20.0).unwrap();
        let labels = frame_labels(&rec, &grid);
        for (state, label) in [(HeartState::S1, SegmentLabel::S1), (HeartState::S2, SegmentLabel::S2)] {
            // every sound interval that contains a frame centre shows up as one run
            let visible = rec
                .annotations()
                .iter()
                .filter(|a| a.state == state)
                .filter(|a| (0..grid.n_frames).any(|t| a.contains(grid.frame_center(t))))
                .count();
            assert_eq!(runs(&labels, label), visible, "{bpm} bpm {label}");
        }
    }
}

#[test]
fn oracle_outputs_score_perfectly() {
    let rec = synth_pcg(&SynthConfig {
        duration_s: 8.0,
        ..Default::default()
    })
    .unwrap();
    let grid = FrameGrid::new(rec.samples().len(), 1600, 80.0, 20.0).unwrap();
    let truth = frame_labels(&rec, &grid);
    let eta: Vec<f64> = truth.iter().map(|l| l.target()).collect();
    let cfg = DecodeConfig {
        min_dur_ms: 0.0,
        ..Default::default()
    };
    let decoded = decode(&eta, &cfg, 20.0).unwrap();
    assert_eq!(decoded.labels, truth);
    let m = metrics(confusion(&decoded.labels, &truth).unwrap());
    for v in [m.ppv, m.se, m.spe, m.acc, m.f1] {
        assert_eq!(v, Some(1.0));
    }
}

#[test]
fn trained_model_survives_checkpoint_and_disk() {
    let cfg = tiny_config();
    let data = DatasetSplit::synthetic(&cfg).unwrap();
    let run = train_run(&cfg, &data).unwrap();
    assert_eq!(run.history.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    run.model.to_checkpoint().unwrap().save(&path).unwrap();
    let back = TrainedModel::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(back.params, run.model.params);

    // scoring files on disk matches scoring the in-memory recordings
    for r in &data.test {
        write_wav(
            dir.path().join(format!("{}.wav", r.id())),
            r.samples(),
            r.sample_rate_hz(),
        )
        .unwrap();
        write_annotations(dir.path().join(format!("{}.csv", r.id())), r.annotations()).unwrap();
    }
    let from_disk = load_dir(dir.path()).unwrap();
    assert_eq!(from_disk.len(), data.test.len());
    let a = evaluate(&run.model, &data.test).unwrap();
    let b = evaluate(&back, &from_disk).unwrap();
    assert_eq!(a.window.counts.total(), b.window.counts.total());
    // 16-bit quantisation may move a window or two, never many
    let diff = (a.window.acc.unwrap() - b.window.acc.unwrap()).abs();
    assert!(diff < 0.02, "{diff}");

    let seg = segment(&back, &data.test[0]).unwrap();
    assert_eq!(seg.eta.len(), seg.rows().len());
    assert_eq!(seg.eta.len(), seg.center_samples.len());
}
