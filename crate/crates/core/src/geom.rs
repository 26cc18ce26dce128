//! Planar rigid transforms and oriented rectangles.

use crate::bev::{wrap_angle, BevPoint};
use std::f64::consts::FRAC_PI_2;

/// A pose on the ground plane. `yaw` is measured counter-clockwise from `+x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: BevPoint,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: BevPoint, yaw: f64) -> Self {
        Self { position, yaw }
    }

    /// Express a world point in this pose's frame, with the heading along `+y`
    /// and the right-hand side along `+x`.
    pub fn to_local(&self, p: BevPoint) -> BevPoint {
        (p - self.position).rotate(FRAC_PI_2 - self.yaw)
    }

    /// Rotate a world vector (velocity, acceleration) into this frame.
    pub fn vector_to_local(&self, v: BevPoint) -> BevPoint {
        v.rotate(FRAC_PI_2 - self.yaw)
    }

    pub fn heading_to_local(&self, heading: f64) -> f64 {
        wrap_angle(heading - self.yaw + FRAC_PI_2)
    }
}

/// A rectangle with its `length` along `heading` and `width` across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: BevPoint,
    pub length: f64,
    pub width: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn new(center: BevPoint, length: f64, width: f64, heading: f64) -> Self {
        Self {
            center,
            length,
            width,
            heading,
        }
    }

    /// Unit vectors along the length and width directions.
    pub fn axes(&self) -> [BevPoint; 2] {
        let (s, c) = self.heading.sin_cos();
        [BevPoint::new(c, s), BevPoint::new(-s, c)]
    }

    pub fn corners(&self) -> [BevPoint; 4] {
        let [u, v] = self.axes();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let c = self.center;
        [
            c + u * hl + v * hw,
            c - u * hl + v * hw,
            c - u * hl - v * hw,
            c + u * hl - v * hw,
        ]
    }

    pub fn contains(&self, p: BevPoint) -> bool {
        let [u, v] = self.axes();
        let d = p - self.center;
        let a = d.x * u.x + d.y * u.y;
        let b = d.x * v.x + d.y * v.y;
        a.abs() <= self.length / 2.0 && b.abs() <= self.width / 2.0
    }

    /// Grow both dimensions by `2 * margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            length: self.length + 2.0 * margin,
            width: self.width + 2.0 * margin,
            ..*self
        }
    }

    fn project(&self, axis: BevPoint) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self.corners() {
            let d = p.x * axis.x + p.y * axis.y;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }
}

/// Separating-axis test over the four edge normals. Touching counts as
/// intersecting.
pub fn rect_intersects(a: &OrientedRect, b: &OrientedRect) -> bool {
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (amin, amax) = a.project(axis);
        let (bmin, bmax) = b.project(axis);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}
