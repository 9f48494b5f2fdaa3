use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use pcgseg::config::RunConfig;
use pcgseg::decode::{frame_labels, inference_windows, write_events_csv, write_segmentation_csv, SegmentLabel};
use pcgseg::error::{Error, Result};
use pcgseg::features::{feature_table_rows, write_feature_dump, FeatureKind};
use pcgseg::interpret::{
    attention_weights, export_embeddings, importance_map, pca_2d, write_attention_csv, write_embeddings_csv,
    write_importance_csv, write_pca_csv,
};
use pcgseg::matrix::Matrix;
use pcgseg::model::Checkpoint;
use pcgseg::pipeline::{
    derive_seed, evaluate, segment as run_segment, synthetic_recordings, train_run, DatasetSplit, EvalReport,
    FeaturePipeline, SeedStream, TrainedModel,
};
use pcgseg::signal::{load_annotations, load_dir, load_wav, write_annotations, write_wav, PcgRecording};
use pcgseg::training::write_history_csv;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::svg;

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn save_recordings(dir: &Path, recs: &[PcgRecording]) -> Result<()> {
    create_dir(dir)?;
    for r in recs {
        write_wav(dir.join(format!("{}.wav", r.id())), r.samples(), r.sample_rate_hz())?;
        write_annotations(dir.join(format!("{}.csv", r.id())), r.annotations())?;
    }
    Ok(())
}

pub fn synth(cfg: &RunConfig, out: &Path, count: Option<usize>) -> Result<()> {
    let mut syn = cfg.data.synthetic.clone();
    if let Some(n) = count {
        syn.n_recordings = n;
    }
    let recs = synthetic_recordings(&syn, derive_seed(cfg.seed, SeedStream::Data))?;
    save_recordings(out, &recs)?;
    println!("wrote {} recordings to {}", recs.len(), out.display());
    Ok(())
}

pub fn extract(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let recs = load_dir(input)?;
    create_dir(out)?;
    for r in &recs {
        let seq = FeaturePipeline::raw_features(&cfg.features, &cfg.frames, r)?;
        write_feature_dump(out, r.id(), &seq)?;
    }
    println!(
        "extracted {} recordings ({} columns) to {}",
        recs.len(),
        cfg.features.dim(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
}

fn ids(recs: &[PcgRecording]) -> Vec<String> {
    recs.iter().map(|r| r.id().to_string()).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

struct TrainSummary {
    hidden: usize,
    params: usize,
    best_epoch: usize,
    best_val_acc: f64,
    test: EvalReport,
}

fn train_one(cfg: &RunConfig, data: &DatasetSplit, out: &Path) -> Result<TrainSummary> {
    create_dir(out)?;
    let run = train_run(cfg, data)?;
    let ck = run.model.to_checkpoint()?;
    let json = ck.to_json()?;
    std::fs::write(out.join("checkpoint.json"), &json)?;
    write_history_csv(&out.join("history.csv"), &run.history)?;
    let test = evaluate(&run.model, &data.test)?;
    write_json(&out.join("test_metrics.json"), &test)?;
    println!(
        "checkpoint {} sha256 {}",
        out.join("checkpoint.json").display(),
        sha256_hex(json.as_bytes())
    );
    println!(
        "hidden {} best epoch {} test acc {} f1 {}",
        cfg.model.hidden_dim,
        run.best_epoch,
        fmt_opt(test.window.acc),
        fmt_opt(test.window.f1)
    );
    Ok(TrainSummary {
        hidden: cfg.model.hidden_dim,
        params: run.model.params.len(),
        best_epoch: run.best_epoch,
        best_val_acc: run.history[run.best_epoch - 1].val_acc,
        test,
    })
}

pub fn train(cfg: &RunConfig, hidden: &[usize], data: Option<&Path>, out: &Path) -> Result<()> {
    let recs = match data {
        Some(dir) => load_dir(dir)?,
        None => synthetic_recordings(&cfg.data.synthetic, derive_seed(cfg.seed, SeedStream::Data))?,
    };
    let split = DatasetSplit::new(&recs, cfg)?;
    create_dir(out)?;
    write_json(
        &out.join("split.json"),
        &SplitFile {
            train: ids(&split.train),
            val: ids(&split.val),
            test: ids(&split.test),
        },
    )?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    if data.is_none() {
        save_recordings(&out.join("test-data"), &split.test)?;
    }
    if hidden.len() <= 1 {
        train_one(cfg, &split, out)?;
        return Ok(());
    }
    let mut csv = String::from("hidden,params,best_epoch,best_val_acc,test_acc,test_f1\n");
    for &h in hidden {
        let mut c = cfg.clone();
        c.model.hidden_dim = h;
        c.validate()?;
        let s = train_one(&c, &split, &out.join(format!("hidden-{h}")))?;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            s.hidden,
            s.params,
            s.best_epoch,
            s.best_val_acc,
            s.test.window.acc.unwrap_or(f64::NAN),
            s.test.window.f1.unwrap_or(f64::NAN)
        )
        .unwrap();
    }
    std::fs::write(out.join("sweep.csv"), csv)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::from_checkpoint(&Checkpoint::load(path)?)
}

pub fn eval(checkpoint: &Path, data: &Path, split: Option<&Path>, out: &Path) -> Result<()> {
    let model = load_model(checkpoint)?;
    let mut recs = load_dir(data)?;
    if let Some(p) = split {
        if !p.is_file() {
            return Err(Error::MissingFile(p.to_path_buf()));
        }
        let s: SplitFile = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        let keep: HashSet<String> = s.test.into_iter().collect();
        recs.retain(|r| keep.contains(r.id()));
        if recs.is_empty() {
            return Err(Error::EmptyDataset(data.to_path_buf()));
        }
    }
    let report = evaluate(&model, &recs)?;
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &report)?;
    let mut csv = String::from("recording_id,n_windows,tp,fp,fn,tn,acc,f1\n");
    for r in &report.recordings {
        let c = r.counts;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.recording_id,
            r.n_windows,
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            r.acc.map_or(String::new(), |v| v.to_string()),
            r.f1.map_or(String::new(), |v| v.to_string())
        )
        .unwrap();
    }
    std::fs::write(out.join("per_recording.csv"), csv)?;
    let w = &report.window;
    println!(
        "{} recordings: acc {} f1 {} ppv {} se {} spe {}",
        recs.len(),
        fmt_opt(w.acc),
        fmt_opt(w.f1),
        fmt_opt(w.ppv),
        fmt_opt(w.se),
        fmt_opt(w.spe)
    );
    Ok(())
}

fn load_recording(wav: &Path, annotations: Option<&Path>) -> Result<PcgRecording> {
    let rec = load_wav(wav)?;
    match annotations {
        Some(a) => load_annotations(a, &rec),
        None => Ok(rec),
    }
}

/// Reference label of every window (centre-frame rule).
fn reference_labels(model: &TrainedModel, rec: &PcgRecording, n_windows: usize) -> Result<Vec<SegmentLabel>> {
    let seq = model.pipeline.features(rec)?;
    let k = model.pipeline.window_frames;
    Ok(frame_labels(rec, &seq.grid)[k / 2..k / 2 + n_windows].to_vec())
}

pub fn segment(checkpoint: &Path, wav: &Path, annotations: Option<&Path>, out: &Path, plot: bool) -> Result<()> {
    let model = load_model(checkpoint)?;
    let rec = load_recording(wav, annotations)?;
    let seg = run_segment(&model, &rec)?;
    create_dir(out)?;
    write_segmentation_csv(&out.join("segmentation.csv"), &seg.rows())?;
    write_events_csv(&out.join("events.csv"), &seg.events)?;
    if plot {
        let reference: Option<Vec<f64>> = match annotations {
            Some(_) => Some(
                reference_labels(&model, &rec, seg.eta.len())?
                    .iter()
                    .map(|l| l.target())
                    .collect(),
            ),
            None => None,
        };
        let doc = svg::overlay(
            &seg.eta,
            reference.as_deref(),
            (model.decode.theta_pos, model.decode.theta_neg),
        );
        std::fs::write(out.join("overlay.svg"), doc)?;
    }
    let count = |l: SegmentLabel| seg.events.iter().filter(|e| e.2 == l).count();
    println!(
        "{}: {} windows, {} S1 events, {} S2 events",
        rec.id(),
        seg.eta.len(),
        count(SegmentLabel::S1),
        count(SegmentLabel::S2)
    );
    Ok(())
}

pub fn explain(checkpoint: &Path, wav: &Path, annotations: Option<&Path>, out: &Path) -> Result<()> {
    let model = load_model(checkpoint)?;
    let rec = load_recording(wav, annotations)?;
    let seq = model.pipeline.features(&rec)?;
    let windows = inference_windows(&seq, model.pipeline.window_frames)?;
    let refs: Vec<&Matrix> = windows.iter().collect();
    let labels: Vec<String> = if annotations.is_some() {
        reference_labels(&model, &rec, windows.len())?
    } else {
        run_segment(&model, &rec)?.decoded.labels
    }
    .iter()
    .map(|l| l.to_string())
    .collect();

    let betas = refs
        .iter()
        .map(|x| attention_weights(x, &model.params, &model.model))
        .collect::<Result<Vec<_>>>()?;
    let groups: Vec<(String, std::ops::Range<usize>)> = model
        .pipeline
        .spec
        .groups()
        .into_iter()
        .map(|(k, r)| (k.as_str().to_string(), r))
        .collect();
    // training means are zero after normalisation
    let baseline = vec![0.0; seq.dim()];
    let maps = refs
        .iter()
        .map(|x| importance_map(x, &model.params, &model.model, &groups, &baseline))
        .collect::<Result<Vec<_>>>()?;
    let q = export_embeddings(&refs, &model.params, &model.model)?;
    let pca = pca_2d(&q)?;

    create_dir(out)?;
    write_attention_csv(&out.join("attention.csv"), &betas)?;
    write_importance_csv(&out.join("importance.csv"), &maps)?;
    let mut frames = String::from("window_index,group");
    for t in 0..model.pipeline.window_frames {
        write!(frames, ",frame{t}").unwrap();
    }
    frames.push('\n');
    for (i, m) in maps.iter().enumerate() {
        for g in &m.groups {
            write!(frames, "{i},{}", g.name).unwrap();
            for v in &g.per_frame {
                write!(frames, ",{v}").unwrap();
            }
            frames.push('\n');
        }
    }
    std::fs::write(out.join("importance_frames.csv"), frames)?;
    write_embeddings_csv(&out.join("embeddings.csv"), &q, &labels)?;
    write_pca_csv(&out.join("pca.csv"), &pca.projection, &labels)?;
    println!(
        "explained {} windows of {} into {}",
        windows.len(),
        rec.id(),
        out.display()
    );
    Ok(())
}

fn row_matches(filter: &str, name: &str, comps: &[FeatureKind]) -> bool {
    let norm = |s: &str| {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_uppercase()
    };
    let joined: Vec<&str> = comps.iter().map(|k| k.as_str()).collect();
    norm(filter) == norm(name) || norm(filter) == norm(&joined.join("+"))
}

pub fn feature_study(cfg: &RunConfig, seeds: &[u64], only: &[String], out: &Path) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "--seeds",
            reason: "need at least one seed".into(),
        });
    }
    let rows: Vec<(&str, Vec<FeatureKind>)> = feature_table_rows()
        .into_iter()
        .filter(|(name, comps)| only.is_empty() || only.iter().any(|f| row_matches(f, name, comps)))
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "--only",
            reason: "no table row matches".into(),
        });
    }
    let table = pcgseg::pipeline::feature_study(cfg, &rows, seeds, |name, seed, rep| {
        log::info!("{name} seed {seed}: acc {}", fmt_opt(rep.window.acc));
    })?;
    create_dir(out)?;
    let mut csv = String::from("features,components,dim,acc_mean,acc_std,f1_mean,acc_by_seed\n");
    for r in &table {
        let m = r.mean_acc();
        let sd = (r.acc.iter().map(|a| (a - m).powi(2)).sum::<f64>() / r.acc.len() as f64).sqrt();
        let comps: Vec<&str> = r.components.iter().map(|k| k.as_str()).collect();
        let per: Vec<String> = r.acc.iter().map(|a| a.to_string()).collect();
        writeln!(
            csv,
            "\"{}\",{},{},{},{},{},{}",
            r.name,
            comps.join("+"),
            r.dim,
            m,
            sd,
            r.mean_f1(),
            per.join(";")
        )
        .unwrap();
        println!(
            "{:<40} dim {:>2}  acc {:.4} ± {:.4}  f1 {:.4}",
            r.name,
            r.dim,
            m,
            sd,
            r.mean_f1()
        );
    }
    std::fs::write(out.join("feature_study.csv"), csv)?;
    Ok(())
}
