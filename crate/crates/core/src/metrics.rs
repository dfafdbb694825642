//! Scoring detections against known change points.
//!
//! Matching is greedy and one-to-one: true change points are taken in order
//! and each claims the nearest unclaimed detection within `margin` (ties go to
//! the earlier detection).
//!
//! CP-AUC sweeps the threshold over the distinct trace values plus `±inf`.
//! At every threshold the detections are the `delta`-local maxima above it,
//! so the detection sets are nested. The true positive rate is
//! `tp / #truth`; the false positive rate is `fp / F`, where `F` is the number
//! of local maxima left unmatched when every local maximum is declared (at
//! least 1). The curve runs from `(0, 0)`, follows the sweep, and is closed
//! at `(1, TPR)` of the loosest threshold; the area is trapezoidal. These
//! conventions are our own, so absolute AUC values are only comparable
//! between runs of this implementation.

use serde::{Deserialize, Serialize};

use crate::detector::{local_maxima, Detections, StatisticTrace};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub change_points: Vec<usize>,
    /// Length of the labelled series, when known.
    pub series_length: Option<usize>,
}

impl GroundTruth {
    pub fn new(change_points: Vec<usize>, series_length: Option<usize>) -> Result<Self> {
        if let Some(w) = change_points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "change points must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let (Some(len), Some(&last)) = (series_length, change_points.last()) {
            if last >= len {
                return Err(Error::InvalidArgument(format!("change point {last} outside a series of length {len}")));
            }
        }
        Ok(Self { change_points, series_length })
    }

    pub fn len(&self) -> usize {
        self.change_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.change_points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Absent when only detections (no trace) were scored.
    pub auc: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub margin: usize,
}

/// Greedy one-to-one matching; the order of `detections` does not matter.
pub fn match_detections(detections: &[usize], truth: &[usize], margin: usize) -> MatchCounts {
    let mut sorted = detections.to_vec();
    sorted.sort_unstable();
    let mut claimed = vec![false; sorted.len()];
    let mut tp = 0;
    for &tau in truth {
        let lo = sorted.partition_point(|&d| d + margin < tau);
        let mut best: Option<(usize, usize)> = None;
        for (k, &d) in sorted.iter().enumerate().skip(lo) {
            if d > tau + margin {
                break;
            }
            let dist = d.abs_diff(tau);
            if !claimed[k] && best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((k, dist));
            }
        }
        if let Some((k, _)) = best {
            claimed[k] = true;
            tp += 1;
        }
    }
    MatchCounts { true_positives: tp, false_positives: sorted.len() - tp, false_negatives: truth.len() - tp }
}

/// Precision, recall and F1 of `detections`.
///
/// Precision is 1 when nothing was detected and recall is 1 when there is
/// nothing to detect, so an empty detection set on an empty truth scores 1;
/// F1 is 0 whenever precision and recall are both 0.
pub fn f1_score(detections: &Detections, truth: &GroundTruth, margin: usize) -> EvalReport {
    let counts = match_detections(&detections.change_points, &truth.change_points, margin);
    let MatchCounts { true_positives: tp, false_positives: fp, false_negatives: fn_ } = counts;
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    EvalReport {
        auc: None,
        f1,
        precision,
        recall,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        margin,
    }
}

/// Points `(fpr, tpr)` of the threshold sweep, from the strictest threshold
/// to the terminal point.
pub fn roc_points(trace: &StatisticTrace, truth: &GroundTruth, margin: usize, delta: usize) -> Vec<(f64, f64)> {
    let candidates = local_maxima(&trace.times, &trace.values, delta);
    let detections_above = |eta: f64| -> Vec<usize> {
        candidates.iter().filter(|&&k| trace.values[k] > eta).map(|&k| trace.times[k]).collect()
    };
    let loosest = match_detections(&detections_above(f64::NEG_INFINITY), &truth.change_points, margin);
    let fp_scale = loosest.false_positives.max(1) as f64;
    let rate = |eta: f64| -> (f64, f64) {
        let c = match_detections(&detections_above(eta), &truth.change_points, margin);
        let tpr = if truth.is_empty() { 1.0 } else { c.true_positives as f64 / truth.len() as f64 };
        ((c.false_positives as f64 / fp_scale).min(1.0), tpr)
    };

    let mut thresholds: Vec<f64> = trace.values.clone();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![(0.0, 0.0), rate(f64::INFINITY)];
    points.extend(thresholds.into_iter().map(rate));
    let last = rate(f64::NEG_INFINITY);
    points.push(last);
    points.push((1.0, last.1));
    points
}

/// Area under the sweep curve of [`roc_points`], clamped to `[0, 1]`.
pub fn cp_auc(trace: &StatisticTrace, truth: &GroundTruth, margin: usize, delta: usize) -> f64 {
    let points = roc_points(trace, truth, margin, delta);
    let area: f64 = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    area.clamp(0.0, 1.0)
}

/// F1 at the trace's own threshold plus CP-AUC.
pub fn evaluate_trace(trace: &StatisticTrace, truth: &GroundTruth, margin: usize, delta: usize) -> EvalReport {
    let detections = crate::detector::detect_peaks_with(trace, trace.config.eta, delta);
    EvalReport { auc: Some(cp_auc(trace, truth, margin, delta)), ..f1_score(&detections, truth, margin) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorConfig;

    fn counts(tp: usize, fp: usize, fn_: usize) -> MatchCounts {
        MatchCounts { true_positives: tp, false_positives: fp, false_negatives: fn_ }
    }

    fn truth(points: &[usize]) -> GroundTruth {
        GroundTruth::new(points.to_vec(), None).unwrap()
    }

    fn dets(points: &[usize]) -> Detections {
        Detections { change_points: points.to_vec() }
    }

    fn trace(values: &[f64]) -> StatisticTrace {
        StatisticTrace {
            times: (0..values.len()).collect(),
            values: values.to_vec(),
            config: DetectorConfig::new(1, 0.0, 1, 0.0),
        }
    }

    #[test]
    fn single_match() {
        assert_eq!(match_detections(&[100], &[102], 10), counts(1, 0, 0));
    }

    #[test]
    fn one_to_one() {
        assert_eq!(match_detections(&[100, 105], &[102], 10), counts(1, 1, 0));
    }

    #[test]
    fn nothing_detected() {
        assert_eq!(match_detections(&[], &[50], 10), counts(0, 0, 1));
    }

    #[test]
    fn nearest_claims_and_ties_go_early() {
        // 98 and 106 are both within margin of 102; 98 is nearer.
        assert_eq!(match_detections(&[106, 98], &[102, 110], 5), counts(2, 0, 0));
        // 100 and 104 are equally near 102; 100 is claimed, 104 left for 107.
        assert_eq!(match_detections(&[104, 100], &[102, 107], 3), counts(2, 0, 0));
    }

    #[test]
    fn outside_margin_does_not_match() {
        assert_eq!(match_detections(&[120], &[100], 10), counts(0, 1, 1));
        assert_eq!(match_detections(&[110], &[100], 10), counts(1, 0, 0));
    }

    #[test]
    fn perfect_f1() {
        let r = f1_score(&dets(&[10, 50]), &truth(&[10, 50]), 5);
        assert_eq!((r.f1, r.precision, r.recall), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_precision_f1() {
        let r = f1_score(&dets(&[100, 105]), &truth(&[102]), 10);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_detections_f1_is_zero() {
        let r = f1_score(&dets(&[]), &truth(&[50]), 10);
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.true_positives + r.false_negatives, 1);
    }

    #[test]
    fn empty_everything_is_perfect() {
        assert_eq!(f1_score(&dets(&[]), &truth(&[]), 10).f1, 1.0);
        assert_eq!(f1_score(&dets(&[3]), &truth(&[]), 10).f1, 0.0);
    }

    #[test]
    fn truth_validation() {
        assert!(GroundTruth::new(vec![5, 5], None).is_err());
        assert!(GroundTruth::new(vec![5, 3], None).is_err());
        assert!(GroundTruth::new(vec![5, 10], Some(10)).is_err());
        assert!(GroundTruth::new(vec![5, 9], Some(10)).is_ok());
    }

    #[test]
    fn peak_at_truth_gives_unit_auc() {
        let t = trace(&[0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        assert_eq!(cp_auc(&t, &truth(&[3]), 1, 1), 1.0);
    }

    #[test]
    fn constant_trace_auc() {
        // Only index 0 is a local maximum. It is within margin of the truth at
        // 1, so the curve jumps straight to (0, 1): area 1. With the truth far
        // away the lone candidate is a false positive: (0,0) -> (1,0) -> (1,0).
        let t = trace(&[2.0; 10]);
        assert_eq!(cp_auc(&t, &truth(&[1]), 1, 1), 1.0);
        assert_eq!(cp_auc(&t, &truth(&[8]), 1, 1), 0.0);
    }

    #[test]
    fn flipped_indicator_auc_is_zero() {
        // The trace dips exactly at the truth. Local maxima (delta 1) are 0
        // and 5; neither is the truth, so TPR stays 0 along the whole curve.
        let mut values = [1.0; 10];
        values[4] = 0.0;
        let t = trace(&values);
        let pts = roc_points(&t, &truth(&[4]), 0, 1);
        assert!(pts.iter().all(|&(_, y)| y == 0.0));
        assert_eq!(cp_auc(&t, &truth(&[4]), 0, 1), 0.0);
    }

    #[test]
    fn hand_swept_auc() {
        // delta 1, margin 0, truth {2, 6}. Local maxima: 2 (v 5), 4 (v 3),
        // 6 (v 4), 8 (v 2). Loosest threshold: tp 2, fp 2, so FPR = fp / 2.
        // Sweep: eta=5 -> {} ; eta=4 -> {2}: (0, .5); eta=3 -> {2,6}: (0, 1);
        // eta=2 -> {2,4,6}: (.5, 1); lower -> all: (1, 1). Area 1.
        let t = trace(&[0.0, 1.0, 5.0, 1.0, 3.0, 1.0, 4.0, 1.0, 2.0, 0.0]);
        assert_eq!(cp_auc(&t, &truth(&[2, 6]), 0, 1), 1.0);
        // Truth {4, 8}: eta=4 -> (.5, 0); eta=3 -> (1, 0); eta=2 -> (1, .5);
        // loosest -> (1, 1). Area 0.
        assert_eq!(cp_auc(&t, &truth(&[4, 8]), 0, 1), 0.0);
        // Truth {2, 8}: eta=4 -> (0,.5); eta=3 -> (.5,.5); eta=2 -> (1,.5);
        // loosest -> (1,1). Area .5.
        assert_eq!(cp_auc(&t, &truth(&[2, 8]), 0, 1), 0.5);
    }

    #[test]
    fn evaluate_trace_combines() {
        let mut t = trace(&[0.0, 1.0, 5.0, 1.0, 0.0]);
        t.config.eta = 2.0;
        let r = evaluate_trace(&t, &truth(&[2]), 1, 1);
        assert_eq!(r.auc, Some(1.0));
        assert_eq!(r.f1, 1.0);
    }
}
