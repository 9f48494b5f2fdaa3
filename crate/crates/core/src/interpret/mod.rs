//! Looking inside a trained model: attention weights, occlusion importance
//! of feature groups, pooled embeddings and their 2-D PCA projection.

mod pca;

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{model_forward, predict, ModelConfig, ModelParams};

pub use pca::{pca_2d, Pca};

/// Attention weights `β` of one window (uniform `1/K` for mean pooling).
pub fn attention_weights(window: &Matrix, params: &ModelParams, config: &ModelConfig) -> Result<Vec<f64>> {
    Ok(model_forward(window, params, config)?.beta)
}

fn check_columns(window: &Matrix, columns: &[usize], baseline: &[f64]) -> Result<()> {
    if baseline.len() != window.cols() {
        return Err(Error::DimensionMismatch {
            context: "occlusion baseline",
            expected: window.cols(),
            got: baseline.len(),
        });
    }
    if let Some(&c) = columns.iter().find(|&&c| c >= window.cols()) {
        return Err(Error::invalid("group", format!("column {c} out of range")));
    }
    Ok(())
}

fn occluded(window: &Matrix, columns: &[usize], frames: Range<usize>, baseline: &[f64]) -> Matrix {
    let mut x = window.clone();
    for t in frames {
        let row = x.row_mut(t);
        for &c in columns {
            row[c] = baseline[c];
        }
    }
    x
}

/// `η(window) − η(window with `columns` set to `baseline` in every frame)`.
/// Positive values mean the group raised the output.
pub fn occlusion_importance(
    window: &Matrix,
    params: &ModelParams,
    config: &ModelConfig,
    columns: &[usize],
    baseline: &[f64],
) -> Result<f64> {
    check_columns(window, columns, baseline)?;
    let eta = predict(window, params, config)?;
    let x = occluded(window, columns, 0..window.rows(), baseline);
    Ok(eta - predict(&x, params, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub name: String,
    pub columns: Range<usize>,
    /// Occluding the group in every frame.
    pub score: f64,
    /// Occluding the group in one frame at a time.
    pub per_frame: Vec<f64>,
}

/// Occlusion scores of every feature group for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    pub baseline_eta: f64,
    pub groups: Vec<GroupImportance>,
}

/// `groups` must partition the feature columns.
pub fn importance_map(
    window: &Matrix,
    params: &ModelParams,
    config: &ModelConfig,
    groups: &[(String, Range<usize>)],
    baseline: &[f64],
) -> Result<ImportanceMap> {
    let mut covered = vec![0u8; window.cols()];
    for (_, r) in groups {
        if r.end > window.cols() {
            return Err(Error::invalid(
                "groups",
                format!("range {r:?} exceeds {} columns", window.cols()),
            ));
        }
        covered[r.clone()].iter_mut().for_each(|c| *c += 1);
    }
    if covered.iter().any(|&c| c != 1) {
        return Err(Error::invalid("groups", "feature groups must partition the columns"));
    }
    let eta = predict(window, params, config)?;
    let mut out = Vec::with_capacity(groups.len());
    for (name, r) in groups {
        let cols: Vec<usize> = r.clone().collect();
        check_columns(window, &cols, baseline)?;
        let score = eta - predict(&occluded(window, &cols, 0..window.rows(), baseline), params, config)?;
        let per_frame = (0..window.rows())
            .map(|t| Ok(eta - predict(&occluded(window, &cols, t..t + 1, baseline), params, config)?))
            .collect::<Result<_>>()?;
        out.push(GroupImportance {
            name: name.clone(),
            columns: r.clone(),
            score,
            per_frame,
        });
    }
    Ok(ImportanceMap {
        baseline_eta: eta,
        groups: out,
    })
}

/// Pooled vectors `q` (one row of width `2H` per window).
pub fn export_embeddings(windows: &[&Matrix], params: &ModelParams, config: &ModelConfig) -> Result<Matrix> {
    let w = 2 * params.dims.hidden_dim;
    let mut data = Vec::with_capacity(windows.len() * w);
    for x in windows {
        data.extend(model_forward(x, params, config)?.q);
    }
    Ok(Matrix::from_vec(windows.len(), w, data))
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

/// `window_index,beta0,…,beta{K-1}`
pub fn write_attention_csv(path: &Path, betas: &[Vec<f64>]) -> Result<()> {
    let k = betas.first().map_or(0, Vec::len);
    let header = std::iter::once("window_index".to_string())
        .chain((0..k).map(|t| format!("beta{t}")))
        .collect::<Vec<_>>()
        .join(",");
    write_rows(
        path,
        &header,
        betas.iter().enumerate().map(|(i, b)| format!("{i},{}", join(b))),
    )
}

/// `window_index,eta,<group>…` with whole-window occlusion scores.
pub fn write_importance_csv(path: &Path, maps: &[ImportanceMap]) -> Result<()> {
    let names: Vec<&str> = maps
        .first()
        .map_or(Vec::new(), |m| m.groups.iter().map(|g| g.name.as_str()).collect());
    let header = format!("window_index,eta,{}", names.join(","));
    write_rows(
        path,
        &header,
        maps.iter().enumerate().map(|(i, m)| {
            let scores: Vec<f64> = m.groups.iter().map(|g| g.score).collect();
            format!("{i},{},{}", m.baseline_eta, join(&scores))
        }),
    )
}

/// `window_index,label,q0,…`
pub fn write_embeddings_csv(path: &Path, q: &Matrix, labels: &[String]) -> Result<()> {
    let header = std::iter::once("window_index,label".to_string())
        .chain((0..q.cols()).map(|c| format!("q{c}")))
        .collect::<Vec<_>>()
        .join(",");
    write_rows(
        path,
        &header,
        q.iter_rows()
            .zip(labels)
            .enumerate()
            .map(|(i, (r, l))| format!("{i},{l},{}", join(r))),
    )
}

/// `x,y,label`
pub fn write_pca_csv(path: &Path, projection: &Matrix, labels: &[String]) -> Result<()> {
    write_rows(
        path,
        "x,y,label",
        projection
            .iter_rows()
            .zip(labels)
            .map(|(r, l)| format!("{},{},{l}", r[0], r[1])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, HeadActivation, LstmWeights, ModelDims};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn window(k: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(k, d, (0..k * d).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn model(seed: u64) -> (ModelParams, ModelConfig) {
        let cfg = ModelConfig::default();
        (init_params(ModelDims::new(4, 5, 5), &cfg, seed).unwrap(), cfg)
    }

    #[test]
    fn attention_export_matches_trace() {
        let (p, cfg) = model(1);
        let x = window(5, 4, 2);
        let b = attention_weights(&x, &p, &cfg).unwrap();
        assert_eq!(b, model_forward(&x, &p, &cfg).unwrap().beta);
        assert_eq!(b.len(), 5);
        assert_eq!(attention_weights(&window(1, 4, 3), &p, &cfg).unwrap(), vec![1.0]);
    }

    #[test]
    fn identical_hidden_states_give_uniform_weights() {
        let (p, _) = model(6);
        let row: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).sin()).collect();
        let hidden = Matrix::from_rows(&vec![row; 7]);
        let (beta, q, _) = crate::model::attention_forward(&hidden, &p, crate::model::Pooling::Attention);
        assert!(beta.iter().all(|&b| b == 1.0 / 7.0));
        for (a, b) in q.iter().zip(hidden.row(0)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn occlusion_basics() {
        let (p, cfg) = model(2);
        let x = window(5, 4, 5);
        let base = vec![0.0; 4];
        assert_eq!(occlusion_importance(&x, &p, &cfg, &[], &base).unwrap(), 0.0);
        let all = occlusion_importance(&x, &p, &cfg, &[0, 1, 2, 3], &base).unwrap();
        let mean_window = Matrix::zeros(5, 4);
        let want = predict(&x, &p, &cfg).unwrap() - predict(&mean_window, &p, &cfg).unwrap();
        assert_eq!(all, want);
        assert!(occlusion_importance(&x, &p, &cfg, &[4], &base).is_err());
    }

    /// A model that reads only the `keep` columns of its input.
    fn masked_model(keep: &[usize]) -> (ModelParams, ModelConfig) {
        let (mut p, cfg) = model(3);
        for w in [&mut p.fwd, &mut p.bwd] {
            let LstmWeights { w_x, .. } = w;
            for r in 0..w_x.rows() {
                for c in 0..w_x.cols() {
                    if !keep.contains(&c) {
                        w_x.set(r, c, 0.0);
                    }
                }
            }
        }
        (p, cfg)
    }

    #[test]
    fn ignored_columns_have_zero_importance() {
        let (p, cfg) = masked_model(&[0, 1]);
        let x = window(5, 4, 8);
        assert_eq!(occlusion_importance(&x, &p, &cfg, &[2, 3], &[0.4; 4]).unwrap(), 0.0);
        assert!(occlusion_importance(&x, &p, &cfg, &[0], &[0.4; 4]).unwrap() != 0.0);
    }

    #[test]
    fn additive_when_only_one_group_is_live() {
        // With every input weight outside one group zeroed, the other groups
        // contribute nothing, so the group scores sum to the total.
        let (p, mut cfg) = masked_model(&[1, 2]);
        cfg.head = HeadActivation::Linear;
        let x = window(5, 4, 9);
        let base = [0.1, -0.2, 0.05, 0.3];
        let groups = vec![
            ("a".to_string(), 0..1),
            ("b".to_string(), 1..3),
            ("c".to_string(), 3..4),
        ];
        let m = importance_map(&x, &p, &cfg, &groups, &base).unwrap();
        let total = occlusion_importance(&x, &p, &cfg, &[0, 1, 2, 3], &base).unwrap();
        let sum: f64 = m.groups.iter().map(|g| g.score).sum();
        assert!((sum - total).abs() < 1e-12);
        assert_eq!(m.groups[0].score, 0.0);
        assert_eq!(m.groups[1].per_frame.len(), 5);
        let bad = vec![("a".to_string(), 0..2), ("b".to_string(), 1..4)];
        assert!(importance_map(&x, &p, &cfg, &bad, &base).is_err());
    }

    #[test]
    fn embeddings() {
        let (p, cfg) = model(4);
        let xs = [window(5, 4, 1), window(5, 4, 2), window(5, 4, 1)];
        let refs: Vec<&Matrix> = xs.iter().collect();
        let q = export_embeddings(&refs, &p, &cfg).unwrap();
        assert_eq!(q.shape(), (3, 10));
        assert_eq!(q.row(0), q.row(2));
        let (p2, _) = model(5);
        assert_ne!(export_embeddings(&refs, &p2, &cfg).unwrap(), q);
    }

    #[test]
    fn csv_exports_parse() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        write_attention_csv(&a, &[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&a).unwrap(),
            "window_index,beta0,beta1\n0,0.5,0.5\n1,0.25,0.75\n"
        );
        let p = dir.path().join("p.csv");
        write_pca_csv(&p, &Matrix::from_rows(&[vec![1.0, 2.0]]), &["S1".into()]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "x,y,label\n1,2,S1\n");
    }

    proptest! {
        #[test]
        fn beta_sums_to_one(seed in 0u64..500) {
            let (p, cfg) = model(seed);
            let b = attention_weights(&window(5, 4, seed), &p, &cfg).unwrap();
            prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
