use crate::tensor::Matrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Linear map from a 3D reference point into query space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefPointProjector {
    /// `[d_q × 3]`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl RefPointProjector {
    /// All-zero weight and bias, so the embedding term vanishes at start.
    pub fn zeros(d_q: usize) -> Self {
        RefPointProjector {
            weight: Matrix::zeros(d_q, 3),
            bias: vec![0.0; d_q],
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.rows()
    }

    /// `row += W·r + b`.
    pub fn add_to(&self, r: &[f64; 3], row: &mut [f64]) {
        for (i, v) in row.iter_mut().enumerate() {
            let w = self.weight.row(i);
            *v += w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + self.bias[i];
        }
    }
}

/// How reference points enter the query rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RpEmbedding {
    /// Content embedding only.
    None,
    /// Fixed sinusoidal encoding of the reference point.
    Sincos,
    /// Trainable per-row table, independent of the reference point.
    Learned,
    /// Trainable zero-initialized linear map of the reference point.
    #[default]
    Rp,
}

impl RpEmbedding {
    pub const ALL: [RpEmbedding; 4] = [
        RpEmbedding::None,
        RpEmbedding::Sincos,
        RpEmbedding::Learned,
        RpEmbedding::Rp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RpEmbedding::None => "none",
            RpEmbedding::Sincos => "sincos",
            RpEmbedding::Learned => "learned",
            RpEmbedding::Rp => "rp",
        }
    }
}

impl std::fmt::Display for RpEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RpEmbedding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RpEmbedding::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown rp embedding {s:?}; expected none, sincos, learned or rp"))
    }
}

/// Sinusoidal features of `r` at octave-spaced frequencies. Dimension `i`
/// encodes coordinate `i % 3`.
pub fn sincos_embedding(r: &[f64; 3], d_q: usize) -> Vec<f64> {
    (0..d_q)
        .map(|i| {
            let coord = r[i % 3];
            let j = i / 3;
            let freq = PI / 50.0 * 2f64.powi((j / 2) as i32);
            if j % 2 == 0 {
                (coord * freq).sin()
            } else {
                (coord * freq).cos()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for r in RpEmbedding::ALL {
            assert_eq!(r.name().parse::<RpEmbedding>().unwrap(), r);
        }
        assert!("fourier".parse::<RpEmbedding>().is_err());
    }

    #[test]
    fn sincos_bounded_and_distinct() {
        let a = sincos_embedding(&[1.0, 2.0, 0.0], 32);
        let b = sincos_embedding(&[1.5, 2.0, 0.0], 32);
        assert_eq!(a.len(), 32);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
        assert_ne!(a, b);
    }
}
