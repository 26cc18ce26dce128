//! Bird's-eye-view coordinates and uniform binning.
//!
//! Axes follow the driving convention used by every question template:
//! `+x` points to the right of the ego vehicle and `+y` points forward.
//! Spatial and kinematic quantities are discretized into `n` half-open bins
//! over `[lo, hi)`; the top bin is closed so `hi` itself is representable and
//! anything outside the range is clamped into the terminal bins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BinError {
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("bin index {index} out of range for {n} bins")]
    OutOfRange { index: i64, n: u32 },
    #[error("invalid bin spec: {0}")]
    InvalidSpec(String),
}

/// A point on the ground plane, in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct BevPoint {
    pub x: f64,
    pub y: f64,
}

impl BevPoint {
    pub const ORIGIN: BevPoint = BevPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &BevPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotate counter-clockwise by `angle` radians about the origin.
    pub fn rotate(&self, angle: f64) -> BevPoint {
        let (s, c) = angle.sin_cos();
        BevPoint::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for BevPoint {
    fn from(v: [f64; 2]) -> Self {
        BevPoint::new(v[0], v[1])
    }
}

impl From<BevPoint> for [f64; 2] {
    fn from(p: BevPoint) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for BevPoint {
    type Output = BevPoint;
    fn add(self, rhs: BevPoint) -> BevPoint {
        BevPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for BevPoint {
    type Output = BevPoint;
    fn sub(self, rhs: BevPoint) -> BevPoint {
        BevPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for BevPoint {
    type Output = BevPoint;
    fn mul(self, rhs: f64) -> BevPoint {
        BevPoint::new(self.x * rhs, self.y * rhs)
    }
}

/// Index of a bin, `0 ≤ value < n` for the `BinSpec` that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinIndex(pub u32);

impl BinIndex {
    pub fn value(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for BinIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinUnit {
    Meters,
    MPerS,
    MPerS2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: u32,
    pub unit: BinUnit,
}

impl BinSpec {
    /// ±50 m in 1000 bins of 0.1 m.
    pub const SPATIAL: BinSpec = BinSpec {
        lo: -50.0,
        hi: 50.0,
        n: 1000,
        unit: BinUnit::Meters,
    };
    /// ±50 m/s in 1000 bins.
    pub const VELOCITY: BinSpec = BinSpec {
        lo: -50.0,
        hi: 50.0,
        n: 1000,
        unit: BinUnit::MPerS,
    };
    /// ±50 m/s² in 1000 bins.
    pub const ACCELERATION: BinSpec = BinSpec {
        lo: -50.0,
        hi: 50.0,
        n: 1000,
        unit: BinUnit::MPerS2,
    };

    pub fn new(lo: f64, hi: f64, n: u32, unit: BinUnit) -> Result<Self, BinError> {
        let spec = BinSpec { lo, hi, n, unit };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BinError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return Err(BinError::InvalidSpec(format!(
                "need finite lo < hi, got [{}, {})",
                self.lo, self.hi
            )));
        }
        if self.n == 0 {
            return Err(BinError::InvalidSpec("need at least one bin".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Worst-case reconstruction error inside `[lo, hi)`.
    pub fn max_error(&self) -> f64 {
        self.width() / 2.0
    }

    pub fn encode(&self, v: f64) -> Result<BinIndex, BinError> {
        encode_bin(v, self)
    }

    pub fn decode(&self, b: BinIndex) -> Result<f64, BinError> {
        decode_bin(b, self)
    }

    /// Encode, mapping non-finite input to the middle bin instead of failing.
    /// Used where a serving path must never error.
    pub fn encode_lossy(&self, v: f64) -> BinIndex {
        if v.is_finite() {
            encode_bin(v, self).expect("finite value always encodes")
        } else {
            BinIndex(self.n / 2)
        }
    }
}

pub fn encode_bin(v: f64, spec: &BinSpec) -> Result<BinIndex, BinError> {
    if !v.is_finite() {
        return Err(BinError::NonFinite(v));
    }
    let top = spec.n - 1;
    if v <= spec.lo {
        return Ok(BinIndex(0));
    }
    if v >= spec.hi {
        return Ok(BinIndex(top));
    }
    let k = ((v - spec.lo) * spec.n as f64 / (spec.hi - spec.lo)).floor();
    // floating error can push values just below `hi` to index n
    Ok(BinIndex((k as u32).min(top)))
}

pub fn decode_bin(b: BinIndex, spec: &BinSpec) -> Result<f64, BinError> {
    if b.0 >= spec.n {
        return Err(BinError::OutOfRange {
            index: b.0 as i64,
            n: spec.n,
        });
    }
    Ok(spec.lo + (b.0 as f64 + 0.5) * spec.width())
}

pub fn encode_point(p: BevPoint, spec: &BinSpec) -> Result<(BinIndex, BinIndex), BinError> {
    Ok((encode_bin(p.x, spec)?, encode_bin(p.y, spec)?))
}

pub fn decode_point(b: (BinIndex, BinIndex), spec: &BinSpec) -> Result<BevPoint, BinError> {
    Ok(BevPoint::new(decode_bin(b.0, spec)?, decode_bin(b.1, spec)?))
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S: BinSpec = BinSpec::SPATIAL;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_bin(-50.0, &S).unwrap(), BinIndex(0));
        assert_eq!(encode_bin(50.0, &S).unwrap(), BinIndex(999));
        // floor((0 + 50) / 0.1)
        assert_eq!(encode_bin(0.0, &S).unwrap(), BinIndex(500));
    }

    #[test]
    fn out_of_range_clamps() {
        assert_eq!(encode_bin(-1e9, &S).unwrap(), BinIndex(0));
        assert_eq!(encode_bin(73.2, &S).unwrap(), BinIndex(999));
    }

    #[test]
    fn non_finite_is_domain_error() {
        assert!(matches!(encode_bin(f64::NAN, &S), Err(BinError::NonFinite(_))));
        assert!(encode_bin(f64::INFINITY, &S).is_err());
        assert_eq!(S.encode_lossy(f64::NAN), BinIndex(500));
    }

    #[test]
    fn decode_examples() {
        assert!((decode_bin(BinIndex(0), &S).unwrap() + 49.95).abs() < 1e-12);
        assert!((decode_bin(BinIndex(999), &S).unwrap() - 49.95).abs() < 1e-12);
        assert!((decode_bin(BinIndex(500), &S).unwrap() - 0.05).abs() < 1e-12);
        assert!(matches!(
            decode_bin(BinIndex(1000), &S),
            Err(BinError::OutOfRange { .. })
        ));
    }

    #[test]
    fn point_examples() {
        let b = |x, y| (BinIndex(x), BinIndex(y));
        assert_eq!(encode_point(BevPoint::new(0.0, 0.0), &S).unwrap(), b(500, 500));
        assert_eq!(encode_point(BevPoint::new(-50.0, -50.0), &S).unwrap(), b(0, 0));
        // floor(62.34 / 0.1), floor(42.4 / 0.1)
        assert_eq!(encode_point(BevPoint::new(12.34, -7.6), &S).unwrap(), b(623, 424));
        let p = decode_point(b(623, 424), &S).unwrap();
        assert!((p.x - 12.35).abs() < 1e-9 && (p.y + 7.55).abs() < 1e-9);
    }

    #[test]
    fn invalid_specs() {
        assert!(BinSpec::new(1.0, 1.0, 10, BinUnit::Meters).is_err());
        assert!(BinSpec::new(-1.0, 1.0, 0, BinUnit::Meters).is_err());
        assert!(BinSpec::new(f64::NAN, 1.0, 4, BinUnit::Meters).is_err());
    }

    #[test]
    fn every_bin_is_idempotent() {
        for spec in [S, BinSpec::VELOCITY, BinSpec::new(-3.0, 7.0, 7, BinUnit::Meters).unwrap()] {
            for k in 0..spec.n {
                let c = decode_bin(BinIndex(k), &spec).unwrap();
                assert_eq!(encode_bin(c, &spec).unwrap(), BinIndex(k));
            }
        }
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.25) - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_error_bounded(v in -50.0f64..50.0) {
            let b = encode_bin(v, &S).unwrap();
            let back = decode_bin(b, &S).unwrap();
            prop_assert!((back - v).abs() <= S.max_error() + 1e-12);
        }

        #[test]
        fn monotone(a in -80.0f64..80.0, b in -80.0f64..80.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(encode_bin(lo, &S).unwrap() <= encode_bin(hi, &S).unwrap());
        }
    }
}
