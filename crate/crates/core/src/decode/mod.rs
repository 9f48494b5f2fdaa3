//! From annotations to targets, and from predictions back to labels,
//! events and scores.

mod labels;
mod metrics;
mod windows;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

pub use labels::{decode, DecodeConfig, Decoded, Event};
pub use metrics::{confusion, match_events, metrics, ConfusionCounts, EventCounts, EventReport, MetricReport};
pub use windows::{
    frame_labels, grid_to_recording_sample, inference_windows, make_windows, window_count, SegmentLabel, WindowExample,
};

/// One row of a segmentation output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRow {
    pub window_index: usize,
    pub center_sample: usize,
    pub eta: f64,
    pub label: SegmentLabel,
}

pub fn write_segmentation_csv(path: &Path, rows: &[SegmentRow]) -> Result<()> {
    let mut s = String::from("window_index,center_sample,eta,label\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.window_index, r.center_sample, r.eta, r.label).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_events_csv(path: &Path, events: &[(usize, usize, SegmentLabel)]) -> Result<()> {
    let mut s = String::from("start_sample,end_sample,state\n");
    for (a, b, l) in events {
        writeln!(s, "{a},{b},{l}").unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}
