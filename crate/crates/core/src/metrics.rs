//! Binary classification metrics with `Left` as the positive class.
//!
//! Ratios with a zero denominator are `None` rather than zero so that
//! report cells stay auditable.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Left, Label::Left) => cm.tp += 1,
            (Label::Stayed, Label::Left) => cm.fp += 1,
            (Label::Stayed, Label::Stayed) => cm.tn += 1,
            (Label::Left, Label::Stayed) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub kappa: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Cohen's kappa from the four cells.
pub fn kappa(cm: &ConfusionMatrix) -> Option<f64> {
    let n = cm.total() as f64;
    if n == 0.0 {
        return None;
    }
    let observed = (cm.tp + cm.tn) as f64 / n;
    let pred_pos = (cm.tp + cm.fp) as f64;
    let pred_neg = (cm.tn + cm.fn_) as f64;
    let true_pos = (cm.tp + cm.fn_) as f64;
    let true_neg = (cm.tn + cm.fp) as f64;
    let expected = (pred_pos * true_pos + pred_neg * true_neg) / (n * n);
    (expected < 1.0).then(|| (observed - expected) / (1.0 - expected))
}

pub fn metric_set(cm: &ConfusionMatrix) -> Result<MetricSet> {
    if cm.total() == 0 {
        return Err(Error::InvalidInput("confusion matrix is empty".into()));
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(MetricSet {
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
        kappa: kappa(cm),
        precision,
        recall,
        sensitivity: recall,
        specificity: ratio(cm.tn, cm.tn + cm.fp),
        f1,
        roc_auc: None,
    })
}

/// Metrics for scored predictions: labels from `score >= 0.5`, plus AUC
/// when both classes are present.
pub fn evaluate_scores(truth: &[Label], scores: &[f64]) -> Result<MetricSet> {
    let predicted: Vec<Label> = scores.iter().map(|&s| label_for_score(s)).collect();
    let mut m = metric_set(&confusion(truth, &predicted)?)?;
    m.roc_auc = roc_auc(scores, truth).ok();
    Ok(m)
}

pub fn label_for_score(score: f64) -> Label {
    if score >= 0.5 {
        Label::Left
    } else {
        Label::Stayed
    }
}

fn check_two_classes(scores: &[f64], truth: &[Label]) -> Result<(usize, usize)> {
    if scores.len() != truth.len() {
        return Err(Error::InvalidInput("score and label counts differ".into()));
    }
    let pos = truth.iter().filter(|l| l.is_left()).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("AUC needs both classes present".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve in Mann-Whitney form: mid-ranks handle ties,
/// which counts tied positive/negative pairs as one half.
pub fn roc_auc(scores: &[f64], truth: &[Label]) -> Result<f64> {
    let (pos, neg) = check_two_classes(scores, truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if truth[k].is_left() {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// ROC points (fpr, tpr) from the highest threshold down, one point per
/// distinct score, starting at (0, 0).
pub fn roc_curve(scores: &[f64], truth: &[Label]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_two_classes(scores, truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]].is_left() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Left as L, Stayed as S};

    #[test]
    fn all_correct() {
        let t = [L, S, S, L];
        let cm = confusion(&t, &t).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let m = metric_set(&cm).unwrap();
        assert_eq!(m.kappa, Some(1.0));
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
    }

    #[test]
    fn all_stayed_predictor() {
        let t = [L, S, S, S, L, S];
        let cm = confusion(&t, &[S; 6]).unwrap();
        assert_eq!(cm.tp, 0);
        let m = metric_set(&cm).unwrap();
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.kappa, Some(0.0));
    }

    #[test]
    fn hand_tally() {
        let t = [L, L, S, S, L, S];
        let p = [L, S, L, S, L, S];
        let cm = confusion(&t, &p).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, fp: 1, tn: 2, fn_: 1 });
        assert!(confusion(&t, &p[..5]).is_err());
    }

    #[test]
    fn f1_from_reported_precision_recall() {
        let (p, r) = (0.797f64, 0.464f64);
        assert!((2.0 * p * r / (p + r) - 0.587).abs() < 1e-3);
    }

    #[test]
    fn auc_edge_cases() {
        let t = [S, S, L, L];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &t).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &t).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[L, L]).is_err());
    }

    fn all_pairs_auc(scores: &[f64], truth: &[Label]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, ti) in truth.iter().enumerate() {
            for (j, tj) in truth.iter().enumerate() {
                if ti.is_left() && !tj.is_left() {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn eight_point_hand_set() {
        let s = [0.9, 0.8, 0.8, 0.6, 0.55, 0.4, 0.3, 0.1];
        let t = [L, S, L, L, S, S, L, S];
        // 4 positives × 4 negatives; wins per positive by hand: 4, 3.5 (one tie), 3, 1
        let oracle = all_pairs_auc(&s, &t);
        assert!((roc_auc(&s, &t).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 11.5 / 16.0).abs() < 1e-12);
    }

    fn label_strategy(n: usize) -> impl Strategy<Value = Vec<Label>> {
        prop::collection::vec(prop_oneof![Just(S), Just(L)], n)
    }

    proptest! {
        #[test]
        fn formula_identities(tp in 0u64..500, fp in 0u64..500, tn in 0u64..500, fn_ in 0u64..500) {
            let cm = ConfusionMatrix { tp, fp, tn, fn_ };
            prop_assume!(cm.total() > 0);
            let m = metric_set(&cm).unwrap();
            let n = cm.total() as f64;
            // independent re-derivation of each formula
            prop_assert!((m.accuracy - (1.0 - (fp + fn_) as f64 / n)).abs() < 1e-12);
            if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
                prop_assert!((f - 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64)).abs() < 1e-12);
                prop_assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
            }
            let po = (tp + tn) as f64 / n;
            let pe = ((tp + fn_) as f64 / n) * ((tp + fp) as f64 / n)
                + ((tn + fp) as f64 / n) * ((tn + fn_) as f64 / n);
            if let Some(k) = m.kappa {
                prop_assert!((k - (po - pe) / (1.0 - pe)).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&k));
            }
            // kappa is symmetric in truth and prediction
            let swapped = ConfusionMatrix { tp, fp: fn_, tn, fn_: fp };
            prop_assert_eq!(kappa(&cm).map(|k| (k * 1e12).round()), kappa(&swapped).map(|k| (k * 1e12).round()));
        }

        #[test]
        fn constant_predictor_has_zero_kappa(truth in label_strategy(40)) {
            let pos = truth.iter().filter(|l| l.is_left()).count();
            prop_assume!(pos > 0 && pos < truth.len());
            for c in [S, L] {
                let cm = confusion(&truth, &vec![c; truth.len()]).unwrap();
                prop_assert_eq!(kappa(&cm), Some(0.0));
            }
        }

        #[test]
        fn auc_routes_agree(scores in prop::collection::vec(0u8..12, 2..60), seed in 0u64..u64::MAX) {
            let truth: Vec<Label> = (0..scores.len())
                .map(|i| if (seed >> (i % 64)) & 1 == 1 { L } else { S })
                .collect();
            let pos = truth.iter().filter(|l| l.is_left()).count();
            prop_assume!(pos > 0 && pos < truth.len());
            let s: Vec<f64> = scores.iter().map(|&v| v as f64 / 11.0).collect();
            let mw = roc_auc(&s, &truth).unwrap();
            let trap = trapezoid_area(&roc_curve(&s, &truth).unwrap());
            prop_assert!((mw - trap).abs() < 1e-12);
            prop_assert!((mw - all_pairs_auc(&s, &truth)).abs() < 1e-12);
            // invariant under strictly increasing transforms
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((roc_auc(&t, &truth).unwrap() - mw).abs() < 1e-12);
        }
    }
}
