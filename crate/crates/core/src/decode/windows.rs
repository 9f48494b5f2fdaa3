use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::FrameGrid;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::matrix::Matrix;
use crate::signal::{HeartState, PcgRecording};

/// The three classes the network distinguishes. Systole and diastole are
/// folded into `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentLabel {
    S1,
    S2,
    None,
}

impl SegmentLabel {
    /// Regression target: `+1`, `-1` or `0`.
    pub fn target(self) -> f64 {
        match self {
            SegmentLabel::S1 => 1.0,
            SegmentLabel::S2 => -1.0,
            SegmentLabel::None => 0.0,
        }
    }

    /// Inverse of [`target`](Self::target); `None` for values outside
    /// `{+1, -1, 0}`.
    pub fn from_target(y: f64) -> Option<Self> {
        match y {
            1.0 => Some(SegmentLabel::S1),
            -1.0 => Some(SegmentLabel::S2),
            0.0 => Some(SegmentLabel::None),
            _ => None,
        }
    }

    pub fn is_sound(self) -> bool {
        self != SegmentLabel::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentLabel::S1 => "S1",
            SegmentLabel::S2 => "S2",
            SegmentLabel::None => "None",
        }
    }
}

impl From<HeartState> for SegmentLabel {
    fn from(s: HeartState) -> Self {
        match s {
            HeartState::S1 => SegmentLabel::S1,
            HeartState::S2 => SegmentLabel::S2,
            _ => SegmentLabel::None,
        }
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SegmentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" => Ok(SegmentLabel::S1),
            "S2" => Ok(SegmentLabel::S2),
            "None" => Ok(SegmentLabel::None),
            _ => Err(Error::invalid("label", format!("unknown label `{s}`"))),
        }
    }
}

/// One training or scoring unit: `K` consecutive frames labelled by the
/// centre frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowExample {
    pub features: Matrix,
    pub target: f64,
    pub label: SegmentLabel,
    pub center_frame: usize,
    pub recording_id: String,
}

/// Maps a frame-grid sample index (possibly at a resampled rate) back to
/// the recording's own sample index.
pub fn grid_to_recording_sample(sample: usize, grid: &FrameGrid, recording_rate_hz: u32) -> usize {
    if grid.sample_rate_hz == recording_rate_hz {
        sample
    } else {
        (sample as u64 * recording_rate_hz as u64 / grid.sample_rate_hz as u64) as usize
    }
}

/// Label of every frame: the annotated state at the frame's centre sample.
pub fn frame_labels(recording: &PcgRecording, grid: &FrameGrid) -> Vec<SegmentLabel> {
    (0..grid.n_frames)
        .map(|t| {
            let s = grid_to_recording_sample(grid.frame_center(t), grid, recording.sample_rate_hz());
            recording.state_at(s).into()
        })
        .collect()
}

fn check_k(k: usize, n_frames: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::invalid("window_frames", format!("must be odd, got {k}")));
    }
    if n_frames < k {
        return Err(Error::invalid(
            "window_frames",
            format!("sequence has {n_frames} frames, fewer than the window length {k}"),
        ));
    }
    Ok(())
}

/// Number of stride-1 windows of length `k` over `n_frames` frames.
pub fn window_count(n_frames: usize, k: usize) -> usize {
    (n_frames + 1).saturating_sub(k)
}

/// Stride-1 centred windows; the `K/2` frames at either end never become
/// centres.
pub fn make_windows(features: &FeatureSequence, labels: &[SegmentLabel], k: usize) -> Result<Vec<WindowExample>> {
    let n = features.n_frames();
    check_k(k, n)?;
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "frame labels",
            expected: n,
            got: labels.len(),
        });
    }
    Ok((0..window_count(n, k))
        .map(|start| {
            let center = start + k / 2;
            let label = labels[center];
            WindowExample {
                features: features.frames.slice_rows(start, k),
                target: label.target(),
                label,
                center_frame: center,
                recording_id: features.recording_id.clone(),
            }
        })
        .collect())
}

/// Unlabelled windows for inference.
pub fn inference_windows(features: &FeatureSequence, k: usize) -> Result<Vec<Matrix>> {
    let n = features.n_frames();
    check_k(k, n)?;
    Ok((0..window_count(n, k))
        .map(|start| features.frames.slice_rows(start, k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StateInterval;

    fn grid(n_frames: usize) -> FrameGrid {
        FrameGrid {
            frame_len_samples: 4,
            frame_shift_samples: 2,
            n_frames,
            sample_rate_hz: 100,
        }
    }

    fn seq(n: usize) -> FeatureSequence {
        let m = Matrix::from_vec(n, 2, (0..2 * n).map(|v| v as f64).collect());
        FeatureSequence::new("r".into(), m, grid(n), vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn encoding_round_trip() {
        for l in [SegmentLabel::S1, SegmentLabel::S2, SegmentLabel::None] {
            assert_eq!(SegmentLabel::from_target(l.target()), Some(l));
            assert_eq!(l.as_str().parse::<SegmentLabel>().unwrap(), l);
        }
        assert_eq!(SegmentLabel::from_target(0.5), None);
    }

    #[test]
    fn labels_from_frame_centres() {
        // frame t spans [2t, 2t+4), centre 2t+2
        let ann = vec![
            StateInterval::new(0, 4, HeartState::S1).unwrap(),
            StateInterval::new(4, 6, HeartState::Systole).unwrap(),
            StateInterval::new(6, 8, HeartState::S2).unwrap(),
            StateInterval::new(8, 12, HeartState::Diastole).unwrap(),
        ];
        let rec = PcgRecording::new("r", vec![0.0; 14], 100, ann).unwrap();
        let labels = frame_labels(&rec, &grid(6));
        use SegmentLabel::*;
        // centres 2,4,6,8,10,12; 4 and 6 sit on boundaries and join the interval starting there
        assert_eq!(labels, vec![S1, None, S2, None, None, None]);
    }

    #[test]
    fn resampled_grid_maps_back() {
        let g = FrameGrid {
            sample_rate_hz: 1000,
            ..grid(1)
        };
        assert_eq!(grid_to_recording_sample(500, &g, 2000), 1000);
        assert_eq!(grid_to_recording_sample(501, &g, 1000), 501);
    }

    #[test]
    fn window_slicing() {
        assert_eq!(window_count(997, 7), 991);
        let s = seq(9);
        let mut labels = vec![SegmentLabel::None; 9];
        labels[4] = SegmentLabel::S2;
        let w = make_windows(&s, &labels, 3).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w[0].center_frame, 1);
        assert_eq!(w[3].center_frame, 4);
        assert_eq!(w[3].target, -1.0);
        assert_eq!(w[3].features.row(0), s.frames.row(3));
        assert!(w.iter().filter(|x| x.center_frame != 4).all(|x| x.target == 0.0));
        assert!(make_windows(&s, &labels, 4).is_err());
        assert!(make_windows(&s, &labels, 11).is_err());
        assert!(make_windows(&s, &labels[1..], 3).is_err());
        assert_eq!(inference_windows(&s, 3).unwrap().len(), 7);
    }
}
