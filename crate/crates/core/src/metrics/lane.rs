//! Lane F1 by discrete Fréchet matching of resampled centerlines.

use super::detection::{greedy_match, MatchCounts, PrF1};
use crate::bev::BevPoint;
use serde::{Deserialize, Serialize};

pub const LANE_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];
/// Points per polyline after arc-length resampling.
pub const LANE_RESAMPLE: usize = 11;

/// Discrete Fréchet distance. Both polylines must be non-empty.
pub fn frechet(a: &[BevPoint], b: &[BevPoint]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "frechet needs non-empty polylines");
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = pa.distance(pb);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// `n` points spaced evenly by arc length from first to last vertex.
pub fn resample_polyline(points: &[BevPoint], n: usize) -> Vec<BevPoint> {
    assert!(!points.is_empty() && n >= 2, "resampling needs points and n >= 2");
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + w[0].distance(&w[1]));
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![points[0]; n];
    }
    let mut seg = 0;
    (0..n)
        .map(|k| {
            let s = total * k as f64 / (n - 1) as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            points[seg] + (points[seg + 1] - points[seg]) * t
        })
        .collect()
}

/// Per-threshold match counts for one sample.
pub fn match_lanes(preds: &[Vec<BevPoint>], gts: &[Vec<BevPoint>]) -> [MatchCounts; 3] {
    let rp: Vec<_> = preds.iter().map(|l| resample_polyline(l, LANE_RESAMPLE)).collect();
    let rg: Vec<_> = gts.iter().map(|l| resample_polyline(l, LANE_RESAMPLE)).collect();
    let dist: Vec<Vec<f64>> = rp.iter().map(|p| rg.iter().map(|g| frechet(p, g)).collect()).collect();
    LANE_THRESHOLDS.map(|t| MatchCounts {
        tp: greedy_match(rp.len(), rg.len(), t, |i, j| Some(dist[i][j])).len(),
        predictions: rp.len(),
        ground_truth: rg.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneF1 {
    pub per_threshold: Vec<(f64, PrF1)>,
    /// Precision, recall and F1 each averaged over thresholds.
    pub mean: PrF1,
}

impl LaneF1 {
    pub fn from_counts(counts: &[MatchCounts; 3]) -> Self {
        let per_threshold: Vec<(f64, PrF1)> = LANE_THRESHOLDS
            .iter()
            .zip(counts)
            .map(|(&t, c)| (t, c.scores()))
            .collect();
        let avg = |f: fn(&PrF1) -> f64| per_threshold.iter().map(|(_, s)| f(s)).sum::<f64>() / 3.0;
        LaneF1 {
            mean: PrF1 {
                precision: avg(|s| s.precision),
                recall: avg(|s| s.recall),
                f1: avg(|s| s.f1),
            },
            per_threshold,
        }
    }
}

pub fn lane_f1(preds: &[Vec<BevPoint>], gts: &[Vec<BevPoint>]) -> LaneF1 {
    LaneF1::from_counts(&match_lanes(preds, gts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lane(x: f64) -> Vec<BevPoint> {
        (0..4).map(|k| BevPoint::new(x, 5.0 * k as f64)).collect()
    }

    #[test]
    fn frechet_basics() {
        let a = lane(0.0);
        assert_eq!(frechet(&a, &a), 0.0);
        let b = lane(1.5);
        assert!((frechet(&a, &b) - 1.5).abs() < 1e-12);
        assert_eq!(frechet(&a, &b), frechet(&b, &a));
    }

    #[test]
    fn frechet_respects_order() {
        let a = lane(0.0);
        let rev: Vec<_> = a.iter().rev().copied().collect();
        assert!((frechet(&a, &rev) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn resample_even_spacing() {
        let pts = [BevPoint::new(0.0, 0.0), BevPoint::new(0.0, 2.0), BevPoint::new(8.0, 2.0)];
        let r = resample_polyline(&pts, 11);
        assert_eq!(r.len(), 11);
        assert_eq!(r[0], pts[0]);
        assert!(r[10].distance(&pts[2]) < 1e-12);
        for w in r.windows(2) {
            assert!(w[0].distance(&w[1]) <= 1.0 + 1e-12);
        }
        assert!(r[1].distance(&BevPoint::new(0.0, 1.0)) < 1e-12);
    }

    #[test]
    fn identical_lanes() {
        let l = vec![lane(0.0), lane(3.5), lane(-3.5)];
        let s = lane_f1(&l, &l);
        assert_eq!(s.mean.f1, 1.0);
    }

    #[test]
    fn offset_five_meters_never_matches() {
        let s = lane_f1(&[lane(5.0)], &[lane(0.0)]);
        for (_, r) in &s.per_threshold {
            assert_eq!(r.f1, 0.0);
        }
    }

    #[test]
    fn threshold_mean() {
        // 1.5 m offset matches at 2 and 3 m only
        let s = lane_f1(&[lane(1.5)], &[lane(0.0)]);
        assert!((s.mean.f1 - 2.0 / 3.0).abs() < 1e-12);
    }
}
