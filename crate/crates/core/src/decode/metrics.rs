use serde::{Deserialize, Serialize};

use super::SegmentLabel;
use crate::error::{Error, Result};

/// Window-level counts. An S1 window predicted as S2 (or the reverse) adds
/// one false negative and one false positive, so the four counts only sum
/// to the window count when no such cross confusion occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

pub fn confusion(pred: &[SegmentLabel], truth: &[SegmentLabel]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "confusion labels",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        if t.is_sound() {
            if p == t {
                c.tp += 1;
            } else {
                c.fn_ += 1;
            }
        }
        if p.is_sound() && p != t {
            c.fp += 1;
        }
        if !t.is_sound() && !p.is_sound() {
            c.tn += 1;
        }
    }
    Ok(c)
}

/// PPV, sensitivity, specificity, accuracy and F1. A ratio whose
/// denominator is zero is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ppv: Option<f64>,
    pub se: Option<f64>,
    pub spe: Option<f64>,
    pub acc: Option<f64>,
    pub f1: Option<f64>,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(counts: ConfusionCounts) -> MetricReport {
    let ConfusionCounts { tp, fp, fn_, tn } = counts;
    let ppv = ratio(tp, tp + fp);
    let se = ratio(tp, tp + fn_);
    // 2·ppv·se/(ppv+se) simplifies to 2tp/(2tp+fp+fn), which avoids a
    // rounding step when both are defined.
    let f1 = match (ppv, se) {
        (Some(p), Some(s)) if p + s > 0.0 => ratio(2 * tp, 2 * tp + fp + fn_),
        _ => None,
    };
    MetricReport {
        ppv,
        se,
        spe: ratio(tn, tn + fp),
        acc: ratio(tp + tn, tp + tn + fp + fn_),
        f1,
        counts,
    }
}

/// Event-level detection counts: a reference event is found when a
/// predicted event of the same class has its centre within the collar of
/// the reference centre (one-to-one, earliest match first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    pub matched: u64,
    pub missed: u64,
    pub spurious: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub ppv: Option<f64>,
    pub se: Option<f64>,
    pub f1: Option<f64>,
    pub counts: EventCounts,
}

impl EventCounts {
    pub fn add(&mut self, o: &EventCounts) {
        self.matched += o.matched;
        self.missed += o.missed;
        self.spurious += o.spurious;
    }

    pub fn report(&self) -> EventReport {
        let tp = self.matched;
        let ppv = ratio(tp, tp + self.spurious);
        let se = ratio(tp, tp + self.missed);
        let f1 = match (ppv, se) {
            (Some(p), Some(s)) if p + s > 0.0 => ratio(2 * tp, 2 * tp + self.spurious + self.missed),
            _ => None,
        };
        EventReport {
            ppv,
            se,
            f1,
            counts: *self,
        }
    }
}

/// `reference` and `predicted` are `(start_sample, end_sample, label)`.
pub fn match_events(
    reference: &[(usize, usize, SegmentLabel)],
    predicted: &[(usize, usize, SegmentLabel)],
    collar_samples: f64,
) -> EventCounts {
    let centre = |&(s, e, _): &(usize, usize, SegmentLabel)| 0.5 * (s + e) as f64;
    let mut used = vec![false; predicted.len()];
    let mut c = EventCounts::default();
    for r in reference {
        let rc = centre(r);
        let hit = predicted
            .iter()
            .enumerate()
            .filter(|(j, p)| !used[*j] && p.2 == r.2 && (centre(p) - rc).abs() <= collar_samples)
            .min_by(|a, b| (centre(a.1) - rc).abs().total_cmp(&(centre(b.1) - rc).abs()))
            .map(|(j, _)| j);
        match hit {
            Some(j) => {
                used[j] = true;
                c.matched += 1;
            }
            None => c.missed += 1,
        }
    }
    c.spurious = used.iter().filter(|u| !**u).count() as u64;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SegmentLabel::*;

    fn counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_rules() {
        let truth = [S1, S1, S1, S1, S1, None, None, None, None, None];
        assert_eq!(confusion(&truth, &truth).unwrap(), counts(5, 0, 0, 5));
        assert_eq!(confusion(&[S2], &[S1]).unwrap(), counts(0, 1, 1, 0));
        assert_eq!(confusion(&[S1], &[None]).unwrap(), counts(0, 1, 0, 0));
        assert_eq!(confusion(&[None], &[S2]).unwrap(), counts(0, 0, 1, 0));
        assert!(confusion(&[S1], &[]).is_err());
    }

    #[test]
    fn metric_arithmetic() {
        let m = metrics(counts(8, 2, 2, 8));
        for v in [m.ppv, m.se, m.spe, m.acc, m.f1] {
            assert_eq!(v, Some(0.8));
        }
        let m = metrics(counts(90, 10, 5, 95));
        let expect = [0.9, 90.0 / 95.0, 95.0 / 105.0, 185.0 / 200.0, 180.0 / 195.0];
        for (v, e) in [m.ppv, m.se, m.spe, m.acc, m.f1].iter().zip(expect) {
            assert!((v.unwrap() - e).abs() < 1e-12);
        }
        let m = metrics(counts(7, 0, 0, 3));
        assert!([m.ppv, m.se, m.spe, m.acc, m.f1].iter().all(|v| *v == Some(1.0)));
        let m = metrics(counts(0, 0, 0, 4));
        assert_eq!(
            (m.ppv, m.se, m.f1, m.spe),
            (Option::None, Option::None, Option::None, Some(1.0))
        );
    }

    #[test]
    fn json_has_counts() {
        let j = serde_json::to_value(metrics(counts(1, 2, 3, 4))).unwrap();
        assert_eq!(j["counts"]["fn"], 3);
        assert_eq!(j["counts"]["tn"], 4);
    }

    #[test]
    fn event_matching() {
        let r = [(100, 200, S1), (500, 600, S2), (900, 1000, S1)];
        let p = [(110, 210, S1), (505, 600, S1), (1300, 1400, S1)];
        let c = match_events(&r, &p, 96.0);
        assert_eq!(
            c,
            EventCounts {
                matched: 1,
                missed: 2,
                spurious: 2
            }
        );
        assert_eq!(c.report().se, Some(1.0 / 3.0));
    }

    proptest! {
        #[test]
        fn swapping_fp_fn(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
            let a = metrics(counts(tp, fp, fn_, tn));
            let b = metrics(counts(tp, fn_, fp, tn));
            prop_assert_eq!(a.ppv, b.se);
            prop_assert_eq!(a.se, b.ppv);
            prop_assert_eq!(a.acc, b.acc);
        }

        #[test]
        fn counts_partition_without_cross_confusion(
            pairs in proptest::collection::vec((0u8..3, 0u8..3), 1..80)
        ) {
            let lab = |v: u8| [S1, S2, None][v as usize];
            let (p, t): (Vec<_>, Vec<_>) = pairs
                .iter()
                .map(|&(a, b)| (lab(a), lab(b)))
                .filter(|(a, b)| !(a.is_sound() && b.is_sound() && a != b))
                .unzip();
            prop_assert_eq!(confusion(&p, &t).unwrap().total(), p.len() as u64);
        }
    }
}
