use serde::{Deserialize, Serialize};

use super::SegmentLabel;
use crate::dsp::FrameGrid;
use crate::error::{Error, Result};
use crate::signal::{HeartState, StateInterval};

use super::windows::grid_to_recording_sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// `η ≥ theta_pos` ⇒ S1.
    pub theta_pos: f64,
    /// `η ≤ theta_neg` ⇒ S2.
    pub theta_neg: f64,
    /// Sound events shorter than this are relabelled `None`.
    pub min_dur_ms: f64,
    /// Centre tolerance for the event-level report.
    pub event_collar_ms: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            theta_pos: 0.5,
            theta_neg: -0.5,
            min_dur_ms: 40.0,
            event_collar_ms: 60.0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_neg < 0.0 && 0.0 < self.theta_pos) {
            return Err(Error::invalid(
                "thresholds",
                format!(
                    "need theta_neg < 0 < theta_pos, got {} / {}",
                    self.theta_neg, self.theta_pos
                ),
            ));
        }
        if !(self.min_dur_ms >= 0.0 && self.event_collar_ms >= 0.0) {
            return Err(Error::invalid("decode", "durations must be non-negative"));
        }
        Ok(())
    }

    /// Threshold rule alone, without the duration clean-up.
    pub fn classify(&self, eta: f64) -> SegmentLabel {
        if eta >= self.theta_pos {
            SegmentLabel::S1
        } else if eta <= self.theta_neg {
            SegmentLabel::S2
        } else {
            SegmentLabel::None
        }
    }
}

/// A run of consecutive windows sharing a sound label; `end_window` is
/// exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub start_window: usize,
    pub end_window: usize,
    pub label: SegmentLabel,
}

impl Event {
    pub fn len(&self) -> usize {
        self.end_window - self.start_window
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sample span in the recording: from half a shift before the first
    /// window's centre frame to half a shift after the last one's.
    pub fn sample_span(&self, window_frames: usize, grid: &FrameGrid, recording_rate_hz: u32) -> (usize, usize) {
        let half = grid.frame_shift_samples / 2;
        let first = grid.frame_center(self.start_window + window_frames / 2);
        let last = grid.frame_center(self.end_window - 1 + window_frames / 2);
        let start = first.saturating_sub(half);
        let end = last + (grid.frame_shift_samples - half);
        (
            grid_to_recording_sample(start, grid, recording_rate_hz),
            grid_to_recording_sample(end, grid, recording_rate_hz),
        )
    }

    pub fn to_interval(&self, window_frames: usize, grid: &FrameGrid, recording_rate_hz: u32) -> Result<StateInterval> {
        let (s, e) = self.sample_span(window_frames, grid, recording_rate_hz);
        let state = match self.label {
            SegmentLabel::S1 => HeartState::S1,
            SegmentLabel::S2 => HeartState::S2,
            SegmentLabel::None => HeartState::None,
        };
        StateInterval::new(s, e, state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub labels: Vec<SegmentLabel>,
    pub events: Vec<Event>,
}

fn runs(labels: &[SegmentLabel]) -> Vec<Event> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push(Event {
                start_window: start,
                end_window: i,
                label: labels[start],
            });
            start = i;
        }
    }
    out
}

/// Thresholds `η`, merges runs into events and drops sound events shorter
/// than `min_dur_ms`, where each window accounts for one frame shift.
pub fn decode(eta: &[f64], config: &DecodeConfig, shift_ms: f64) -> Result<Decoded> {
    config.validate()?;
    if !(shift_ms > 0.0) {
        return Err(Error::invalid("shift_ms", "must be positive"));
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction series"));
    }
    let mut labels: Vec<SegmentLabel> = eta.iter().map(|&e| config.classify(e)).collect();
    for ev in runs(&labels) {
        if ev.label.is_sound() && (ev.len() as f64) * shift_ms < config.min_dur_ms {
            labels[ev.start_window..ev.end_window].fill(SegmentLabel::None);
        }
    }
    let events = runs(&labels).into_iter().filter(|e| e.label.is_sound()).collect();
    Ok(Decoded { labels, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SegmentLabel::*;

    fn cfg(min_dur_ms: f64) -> DecodeConfig {
        DecodeConfig {
            min_dur_ms,
            ..Default::default()
        }
    }

    #[test]
    fn threshold_and_merge() {
        let d = decode(&[0.9, 0.9, 0.0, -0.9], &cfg(20.0), 20.0).unwrap();
        assert_eq!(d.labels, vec![S1, S1, None, S2]);
        assert_eq!(d.events.len(), 2);
        assert_eq!((d.events[0].label, d.events[0].len()), (S1, 2));
        assert_eq!((d.events[1].label, d.events[1].len()), (S2, 1));
        // the default 40 ms minimum removes the single-window S2
        let d = decode(&[0.9, 0.9, 0.0, -0.9], &DecodeConfig::default(), 20.0).unwrap();
        assert_eq!(d.labels, vec![S1, S1, None, None]);
    }

    #[test]
    fn isolated_spike_removed() {
        let d = decode(&[0.0, 0.0, 0.9, 0.0, 0.0], &cfg(60.0), 20.0).unwrap();
        assert!(d.labels.iter().all(|&l| l == None));
        assert!(d.events.is_empty());
        assert!(decode(&[0.0; 8], &DecodeConfig::default(), 20.0)
            .unwrap()
            .events
            .is_empty());
    }

    #[test]
    fn bad_inputs() {
        let bad = DecodeConfig {
            theta_neg: 0.1,
            ..Default::default()
        };
        assert!(decode(&[0.0], &bad, 20.0).is_err());
        assert!(decode(&[f64::NAN], &DecodeConfig::default(), 20.0).is_err());
    }

    #[test]
    fn event_spans() {
        let grid = FrameGrid {
            frame_len_samples: 128,
            frame_shift_samples: 32,
            n_frames: 100,
            sample_rate_hz: 1600,
        };
        let e = Event {
            start_window: 0,
            end_window: 2,
            label: S1,
        };
        // windows 0 and 1 have centre frames 3 and 4, centres 160 and 192
        assert_eq!(e.sample_span(7, &grid, 1600), (144, 208));
        assert_eq!(e.sample_span(7, &grid, 3200), (288, 416));
        assert_eq!(e.to_interval(7, &grid, 1600).unwrap().state, HeartState::S1);
    }

    proptest! {
        #[test]
        fn raising_theta_pos_never_adds_s1(
            eta in proptest::collection::vec(-1.5f64..1.5, 1..60),
            lo in 0.05f64..1.0,
            bump in 0.0f64..1.0,
        ) {
            let count = |t: f64| {
                let c = DecodeConfig { theta_pos: t, ..cfg(40.0) };
                decode(&eta, &c, 20.0).unwrap().labels.iter().filter(|&&l| l == S1).count()
            };
            prop_assert!(count(lo + bump) <= count(lo));
        }
    }
}
