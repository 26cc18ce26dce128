//! Distance-threshold detection F1 with greedy one-to-one matching, and
//! precision/recall curves over confidence cuts.

use super::MetricError;
use crate::bev::BevPoint;
use crate::scene::Category;
use serde::{Deserialize, Serialize};

/// Center-distance thresholds in meters.
pub const DETECTION_THRESHOLDS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Harmonic mean of precision and recall, in whatever unit they are given.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Match counts, poolable across samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub predictions: usize,
    pub ground_truth: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: MatchCounts) {
        self.tp += other.tp;
        self.predictions += other.predictions;
        self.ground_truth += other.ground_truth;
    }

    /// A ratio with a zero denominator is 0, except that an empty prediction
    /// set against empty ground truth scores 1 on both.
    pub fn scores(&self) -> PrF1 {
        if self.predictions == 0 && self.ground_truth == 0 {
            return PrF1 {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.tp, self.predictions);
        let recall = ratio(self.tp, self.ground_truth);
        PrF1 {
            precision,
            recall,
            f1: f1_from_pr(precision, recall),
        }
    }
}

/// Greedy one-to-one matching: all admissible pairs with `cost ≤ threshold`
/// are taken in ascending cost (ties by prediction, then ground-truth index)
/// whenever both ends are still free. Returns `(pred, gt)` index pairs.
pub fn greedy_match<F>(n_pred: usize, n_gt: usize, threshold: f64, mut cost: F) -> Vec<(usize, usize)>
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n_pred {
        for j in 0..n_gt {
            if let Some(d) = cost(i, j) {
                if d <= threshold {
                    pairs.push((d, i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; n_pred];
    let mut gt_used = vec![false; n_gt];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !pred_used[i] && !gt_used[j] {
            pred_used[i] = true;
            gt_used[j] = true;
            out.push((i, j));
        }
    }
    out
}

pub fn match_detections(
    preds: &[(Category, BevPoint)],
    gts: &[(Category, BevPoint)],
    threshold: f64,
) -> MatchCounts {
    let matched = greedy_match(preds.len(), gts.len(), threshold, |i, j| {
        (preds[i].0 == gts[j].0).then(|| preds[i].1.distance(&gts[j].1))
    });
    MatchCounts {
        tp: matched.len(),
        predictions: preds.len(),
        ground_truth: gts.len(),
    }
}

pub fn detection_f1(preds: &[(Category, BevPoint)], gts: &[(Category, BevPoint)], threshold: f64) -> PrF1 {
    match_detections(preds, gts, threshold).scores()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredDetection {
    pub category: Category,
    pub center: BevPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl ScoredDetection {
    pub fn new(category: Category, center: BevPoint, confidence: Option<f64>) -> Self {
        ScoredDetection {
            category,
            center,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    /// `None` for the single point of a confidence-free prediction set.
    pub cut: Option<f64>,
    pub precision: f64,
    pub recall: f64,
}

/// One sample's predictions and ground truth.
pub type DetectionSample = (Vec<ScoredDetection>, Vec<(Category, BevPoint)>);

/// Precision and recall pooled over samples at each distinct confidence,
/// highest first. If any prediction lacks a confidence the curve collapses
/// to one point over all predictions.
pub fn pr_curve_pooled(samples: &[DetectionSample], threshold: f64) -> Result<Vec<PrPoint>, MetricError> {
    let mut cuts = Vec::new();
    let mut scored = true;
    for (preds, _) in samples {
        for p in preds {
            match p.confidence {
                Some(c) if (0.0..=1.0).contains(&c) => cuts.push(c),
                Some(c) => return Err(MetricError::Confidence(c)),
                None => scored = false,
            }
        }
    }
    let at = |cut: Option<f64>| {
        let mut counts = MatchCounts::default();
        for (preds, gts) in samples {
            let kept: Vec<(Category, BevPoint)> = preds
                .iter()
                .filter(|p| cut.is_none_or(|c| p.confidence.is_some_and(|pc| pc >= c)))
                .map(|p| (p.category, p.center))
                .collect();
            counts.add(match_detections(&kept, gts, threshold));
        }
        let s = counts.scores();
        PrPoint {
            cut,
            precision: s.precision,
            recall: s.recall,
        }
    };
    if !scored || cuts.is_empty() {
        return Ok(vec![at(None)]);
    }
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    Ok(cuts.into_iter().map(|c| at(Some(c))).collect())
}

pub fn pr_curve(
    preds: &[ScoredDetection],
    gts: &[(Category, BevPoint)],
    threshold: f64,
) -> Result<Vec<PrPoint>, MetricError> {
    pr_curve_pooled(&[(preds.to_vec(), gts.to_vec())], threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(c: Category, x: f64, y: f64) -> (Category, BevPoint) {
        (c, BevPoint::new(x, y))
    }

    #[test]
    fn identical_sets_score_one() {
        let gts = vec![
            det(Category::Car, 1.0, 2.0),
            det(Category::Pedestrian, -3.0, 8.0),
            det(Category::Car, 1.2, 2.0),
        ];
        for t in DETECTION_THRESHOLDS {
            let s = detection_f1(&gts, &gts, t);
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn category_must_agree() {
        let s = detection_f1(&[det(Category::Truck, 0.0, 0.0)], &[det(Category::Car, 0.0, 0.0)], 4.0);
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn greedy_takes_nearest_first() {
        // pred 0 is closest to gt 0, leaving pred 1 with nothing inside 1 m
        let preds = [det(Category::Car, 0.1, 0.0), det(Category::Car, -0.5, 0.0)];
        let gts = [det(Category::Car, 0.0, 0.0), det(Category::Car, 3.0, 0.0)];
        let c = match_detections(&preds, &gts, 1.0);
        assert_eq!(c.tp, 1);
        let s = c.scores();
        assert_eq!((s.precision, s.recall), (0.5, 0.5));
    }

    #[test]
    fn published_f1_pairs() {
        assert!((f1_from_pr(22.7, 41.3) - 29.3).abs() <= 0.05);
        assert!((f1_from_pr(27.2, 74.0) - 39.8).abs() <= 0.05);
        assert_eq!(f1_from_pr(0.0, 0.0), 0.0);
    }

    #[test]
    fn pr_single_correct() {
        let gts = [det(Category::Car, 0.0, 0.0)];
        let preds = [ScoredDetection::new(Category::Car, BevPoint::ORIGIN, Some(0.9))];
        let curve = pr_curve(&preds, &gts, 0.5).unwrap();
        assert_eq!(
            curve,
            vec![PrPoint {
                cut: Some(0.9),
                precision: 1.0,
                recall: 1.0
            }]
        );
    }

    #[test]
    fn pr_without_confidence_is_one_point() {
        let gts = [det(Category::Car, 0.0, 0.0), det(Category::Bus, 5.0, 5.0)];
        let raw = [det(Category::Car, 0.2, 0.0), det(Category::Bus, 9.0, 5.0)];
        let preds: Vec<_> = raw.iter().map(|&(c, p)| ScoredDetection::new(c, p, None)).collect();
        let curve = pr_curve(&preds, &gts, 1.0).unwrap();
        let s = detection_f1(&raw, &gts, 1.0);
        assert_eq!(curve.len(), 1);
        assert_eq!((curve[0].precision, curve[0].recall), (s.precision, s.recall));
    }

    #[test]
    fn confidence_out_of_range() {
        let preds = [ScoredDetection::new(Category::Car, BevPoint::ORIGIN, Some(1.5))];
        assert!(matches!(pr_curve(&preds, &[], 1.0), Err(MetricError::Confidence(_))));
    }
}
