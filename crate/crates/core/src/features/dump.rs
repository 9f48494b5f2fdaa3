//! Feature dumps: a CSV with the feature names as header and one row per
//! frame, plus a JSON sidecar describing the frame grid.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureSequence;
use crate::dsp::FrameGrid;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub recording_id: String,
    pub grid: FrameGrid,
    pub feature_names: Vec<String>,
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_feature_dump(dir: &Path, stem: &str, seq: &FeatureSequence) -> Result<()> {
    let mut csv = seq.feature_names.join(",");
    csv.push('\n');
    for row in seq.frames.iter_rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                csv.push(',');
            }
            write!(csv, "{v}").unwrap();
        }
        csv.push('\n');
    }
    std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let side = FeatureSidecar {
        recording_id: seq.recording_id.clone(),
        grid: seq.grid,
        feature_names: seq.feature_names.clone(),
    };
    let mut json = serde_json::to_string_pretty(&side)?;
    json.push('\n');
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Reads a feature CSV back into `(names, matrix)`.
pub fn read_feature_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("feature csv", "empty file"))?;
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid("feature csv", format!("row {}: {e}", i + 1)))?;
        if vals.len() != names.len() {
            return Err(Error::DimensionMismatch {
                context: "feature csv row",
                expected: names.len(),
                got: vals.len(),
            });
        }
        data.extend(vals);
        rows += 1;
    }
    let cols = names.len();
    Ok((names, Matrix::from_vec(rows, cols, data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract, FeatureSpec};
    use crate::signal::{synth_pcg, SynthConfig};

    #[test]
    fn dump_is_exact() {
        let rec = synth_pcg(&SynthConfig {
            duration_s: 2.0,
            ..Default::default()
        })
        .unwrap();
        let seq = extract(&rec, &FeatureSpec::default(), 80.0, 20.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_feature_dump(dir.path(), "x", &seq).unwrap();
        let (names, m) = read_feature_csv(&dir.path().join("x.csv")).unwrap();
        assert_eq!(names, seq.feature_names);
        assert_eq!(m, seq.frames);
        let side: FeatureSidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("x.json")).unwrap()).unwrap();
        assert_eq!(side.grid, seq.grid);
    }
}
