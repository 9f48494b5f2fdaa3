//! Plain CSV annotations: header `start_sample,end_sample,state`, one
//! half-open interval per row.
//!
//! PhysioNet-style per-sample (or per-frame) state sequences are imported
//! with [`intervals_from_states`], which collapses runs of equal states into
//! intervals and drops `None` runs.

use std::fmt::Write as _;
use std::path::Path;

use super::{HeartState, PcgRecording, StateInterval};
use crate::error::{Error, Result};

pub const HEADER: &str = "start_sample,end_sample,state";

/// Parses annotation CSV text. Blank lines are skipped; the header is
/// optional. Overlap and range checks happen when the intervals are attached
/// to a recording.
pub fn parse_annotations(text: &str) -> Result<Vec<StateInterval>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || (i == 0 && line == HEADER) {
            continue;
        }
        let err = |reason: String| Error::Annotation { line: line_no, reason };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let start: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("bad start_sample `{}`", fields[0])))?;
        let end: usize = fields[1]
            .parse()
            .map_err(|_| err(format!("bad end_sample `{}`", fields[1])))?;
        let state: HeartState = fields[2].parse().map_err(err)?;
        if start >= end {
            return Err(err(format!("start ≥ end ({start} ≥ {end})")));
        }
        out.push(StateInterval {
            start_sample: start,
            end_sample: end,
            state,
        });
    }
    Ok(out)
}

/// Reads an annotation CSV and attaches it to `recording`.
pub fn load_annotations(path: impl AsRef<Path>, recording: &PcgRecording) -> Result<PcgRecording> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    recording.with_annotations(parse_annotations(&text)?)
}

pub fn write_annotations(path: impl AsRef<Path>, intervals: &[StateInterval]) -> Result<()> {
    let mut s = String::from(HEADER);
    s.push('\n');
    for a in intervals {
        writeln!(s, "{},{},{}", a.start_sample, a.end_sample, a.state).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Collapses a per-unit state sequence into intervals over unit indices.
/// Runs of `None` produce no interval.
pub fn intervals_from_states(states: &[HeartState]) -> Vec<StateInterval> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=states.len() {
        if i == states.len() || states[i] != states[start] {
            if states[start] != HeartState::None {
                out.push(StateInterval {
                    start_sample: start,
                    end_sample: i,
                    state: states[start],
                });
            }
            start = i;
        }
    }
    out
}
