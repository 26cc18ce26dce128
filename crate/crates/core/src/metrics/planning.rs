//! Open-loop planning metrics: L2 displacement and collision rate at 1, 2
//! and 3 seconds.

use super::MetricError;
use crate::bev::BevPoint;
use crate::geom::{rect_intersects, OrientedRect};
use crate::scene::{Scene, EGO_LENGTH, EGO_WIDTH, PLAN_LEN};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Waypoints per horizon: 1 s, 2 s, 3 s at 0.5 s spacing.
pub const HORIZON_WAYPOINTS: [usize; 3] = [2, 4, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum L2Convention {
    /// Mean error over all waypoints up to the horizon.
    #[default]
    Stp3,
    /// Error of the waypoint at the horizon.
    AtHorizon,
}

impl std::str::FromStr for L2Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stp3" => Ok(L2Convention::Stp3),
            "at-horizon" => Ok(L2Convention::AtHorizon),
            _ => Err(format!("unknown L2 convention {s:?}; expected stp3 or at-horizon")),
        }
    }
}

/// Values at the three horizons and their mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Horizons {
    #[serde(rename = "1s")]
    pub h1: f64,
    #[serde(rename = "2s")]
    pub h2: f64,
    #[serde(rename = "3s")]
    pub h3: f64,
    pub avg: f64,
}

impl Horizons {
    pub fn from_values(v: [f64; 3]) -> Self {
        Horizons {
            h1: v[0],
            h2: v[1],
            h3: v[2],
            avg: (v[0] + v[1] + v[2]) / 3.0,
        }
    }

    pub fn values(&self) -> [f64; 3] {
        [self.h1, self.h2, self.h3]
    }

    /// Element-wise mean of several results; all zeros for an empty slice.
    pub fn mean(items: &[Horizons]) -> Horizons {
        if items.is_empty() {
            return Horizons::default();
        }
        let n = items.len() as f64;
        let mut acc = [0.0; 3];
        for h in items {
            for (a, v) in acc.iter_mut().zip(h.values()) {
                *a += v;
            }
        }
        Horizons::from_values(acc.map(|a| a / n))
    }
}

fn check_len(pred: &[BevPoint], gt: &[BevPoint]) -> Result<(), MetricError> {
    if pred.len() != PLAN_LEN || gt.len() != PLAN_LEN {
        return Err(MetricError::Shape(format!(
            "trajectories need {PLAN_LEN} waypoints, got {} and {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

pub fn l2_horizons(pred: &[BevPoint], gt: &[BevPoint], convention: L2Convention) -> Result<Horizons, MetricError> {
    check_len(pred, gt)?;
    let err: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| p.distance(g)).collect();
    let v = HORIZON_WAYPOINTS.map(|k| match convention {
        L2Convention::Stp3 => err[..k].iter().sum::<f64>() / k as f64,
        L2Convention::AtHorizon => err[k - 1],
    });
    Ok(Horizons::from_values(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoFootprint {
    pub length: f64,
    pub width: f64,
}

impl Default for EgoFootprint {
    fn default() -> Self {
        EgoFootprint {
            length: EGO_LENGTH,
            width: EGO_WIDTH,
        }
    }
}

impl EgoFootprint {
    pub fn new(length: f64, width: f64) -> Result<Self, MetricError> {
        if !(length > 0.0 && width > 0.0 && length.is_finite() && width.is_finite()) {
            return Err(MetricError::Shape(format!(
                "ego footprint must be positive, got {length} x {width}"
            )));
        }
        Ok(EgoFootprint { length, width })
    }
}

/// Ego rectangles along a plan; each heading follows the chord from the
/// previous waypoint (the origin before the first), keeping the previous
/// heading when the chord is degenerate.
pub fn plan_footprints(pred: &[BevPoint], footprint: &EgoFootprint) -> Vec<OrientedRect> {
    let mut prev = BevPoint::ORIGIN;
    let mut heading = FRAC_PI_2;
    pred.iter()
        .map(|&w| {
            let d = w - prev;
            if d.norm() > 1e-9 {
                heading = d.y.atan2(d.x);
            }
            prev = w;
            OrientedRect::new(w, footprint.length, footprint.width, heading)
        })
        .collect()
}

/// Per-waypoint collision flags for a plan made at frame `t0` of `scene`.
pub fn waypoint_collisions(
    pred: &[BevPoint],
    scene: &Scene,
    t0: usize,
    footprint: &EgoFootprint,
) -> Result<Vec<bool>, MetricError> {
    if pred.len() != PLAN_LEN {
        return Err(MetricError::Shape(format!(
            "trajectory needs {PLAN_LEN} waypoints, got {}",
            pred.len()
        )));
    }
    let base = scene.frames.get(t0).ok_or(MetricError::MissingFrame(t0))?;
    let pose = base.ego.pose();
    plan_footprints(pred, footprint)
        .iter()
        .enumerate()
        .map(|(k, ego)| {
            let f = t0 + k + 1;
            let frame = scene.frames.get(f).ok_or(MetricError::MissingFrame(f))?;
            Ok(frame.agents.iter().any(|a| {
                let r = OrientedRect::new(
                    pose.to_local(a.center),
                    a.length,
                    a.width,
                    pose.heading_to_local(a.heading),
                );
                rect_intersects(ego, &r)
            }))
        })
        .collect()
}

/// Whether a sample has collided by each horizon.
pub fn horizon_collisions(flags: &[bool]) -> [bool; 3] {
    HORIZON_WAYPOINTS.map(|k| flags[..k].iter().any(|&c| c))
}

/// Percentage of samples colliding by each horizon. Each sample is a plan,
/// its scene and the frame it was made at.
pub fn collision_rate(
    samples: &[(&[BevPoint], &Scene, usize)],
    footprint: &EgoFootprint,
) -> Result<Horizons, MetricError> {
    if samples.is_empty() {
        return Ok(Horizons::default());
    }
    let mut hits = [0usize; 3];
    for (pred, scene, t0) in samples {
        let flags = waypoint_collisions(pred, scene, *t0, footprint)?;
        for (h, c) in hits.iter_mut().zip(horizon_collisions(&flags)) {
            *h += c as usize;
        }
    }
    let n = samples.len() as f64;
    Ok(Horizons::from_values(hits.map(|h| 100.0 * h as f64 / n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(dx: f64, dy: f64) -> Vec<BevPoint> {
        (1..=6).map(|k| BevPoint::new(dx, k as f64 + dy)).collect()
    }

    #[test]
    fn l2_examples() {
        let gt = line(0.0, 0.0);
        let zero = l2_horizons(&gt, &gt, L2Convention::Stp3).unwrap();
        assert_eq!(zero, Horizons::default());
        let off: Vec<BevPoint> = gt.iter().map(|p| *p + BevPoint::new(0.3, 0.4)).collect();
        let h = l2_horizons(&off, &gt, L2Convention::Stp3).unwrap();
        for v in [h.h1, h.h2, h.h3, h.avg] {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let mut last = gt.clone();
        last[5].x += 0.6;
        let h = l2_horizons(&last, &gt, L2Convention::Stp3).unwrap();
        assert_eq!((h.h1, h.h2), (0.0, 0.0));
        assert!((h.h3 - 0.1).abs() < 1e-12);
        let h = l2_horizons(&last, &gt, L2Convention::AtHorizon).unwrap();
        assert!((h.h3 - 0.6).abs() < 1e-12);
        assert!(l2_horizons(&gt[..5], &gt, L2Convention::Stp3).is_err());
    }

    #[test]
    fn chord_headings() {
        let pts = vec![
            BevPoint::new(0.0, 1.0),
            BevPoint::new(1.0, 1.0),
            BevPoint::new(1.0, 1.0),
        ];
        let r = plan_footprints(&pts, &EgoFootprint::default());
        assert!((r[0].heading - FRAC_PI_2).abs() < 1e-12);
        assert!(r[1].heading.abs() < 1e-12);
        assert!(r[2].heading.abs() < 1e-12);
    }

    #[test]
    fn convention_parse() {
        assert_eq!("stp3".parse::<L2Convention>().unwrap(), L2Convention::Stp3);
        assert_eq!("at-horizon".parse::<L2Convention>().unwrap(), L2Convention::AtHorizon);
        assert!("final".parse::<L2Convention>().is_err());
    }
}
