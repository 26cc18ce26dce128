//! 3D query tokens and their path into the language model.
//!
//! A query carries a content embedding and a reference point. The reference
//! point is folded into the embedding through a zero-initialized linear map
//! ([`RefPointProjector`]) before a single affine [`Projector`] lifts the rows
//! into model space. Detection queries from past frames are held in a
//! [`MemoryQueue`].

pub mod memory;
mod rp;
pub mod sim;

pub use memory::MemoryQueue;
pub use rp::{sincos_embedding, RefPointProjector, RpEmbedding};
pub use sim::{QueryGenerator, QuerySimConfig, SlotTokens};

use crate::tensor::{Matrix, ShapeError};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryToken {
    pub embedding: Vec<f64>,
    /// `(x, y, z)` in the ego frame; `z` is 0 in the planar simulator.
    pub reference_point: [f64; 3],
    pub confidence: Option<f64>,
}

impl QueryToken {
    pub fn new(embedding: Vec<f64>, reference_point: [f64; 3], confidence: Option<f64>) -> Self {
        QueryToken {
            embedding,
            reference_point,
            confidence,
        }
    }
}

fn check_dims(queries: &[QueryToken], d_q: usize) -> Result<(), ShapeError> {
    for q in queries {
        if q.embedding.len() != d_q {
            return Err(ShapeError::new("query embedding", d_q, q.embedding.len()));
        }
    }
    Ok(())
}

/// Stack content embeddings, adding `W·r + b` for each reference point `r`.
pub fn embed_tokens(queries: &[QueryToken], rp: &RefPointProjector) -> Result<Matrix, ShapeError> {
    let d_q = rp.dim();
    check_dims(queries, d_q)?;
    let mut out = Matrix::zeros(queries.len(), d_q);
    for (i, q) in queries.iter().enumerate() {
        let row = out.row_mut(i);
        row.copy_from_slice(&q.embedding);
        rp.add_to(&q.reference_point, row);
    }
    Ok(out)
}

/// Stack content embeddings without any reference-point term.
pub fn stack_embeddings(queries: &[QueryToken], d_q: usize) -> Result<Matrix, ShapeError> {
    check_dims(queries, d_q)?;
    let rows: Vec<Vec<f64>> = queries.iter().map(|q| q.embedding.clone()).collect();
    Matrix::from_rows(d_q, &rows)
}

/// Single affine layer `y = W x + b` with `W` of shape `[d_llm × d_q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Projector {
    pub fn zeros(d_llm: usize, d_q: usize) -> Self {
        Projector {
            weight: Matrix::zeros(d_llm, d_q),
            bias: vec![0.0; d_llm],
        }
    }

    /// Uniform Glorot initialization, zero bias.
    pub fn random<R: Rng>(d_llm: usize, d_q: usize, rng: &mut R) -> Self {
        let a = (6.0 / (d_llm + d_q) as f64).sqrt();
        let data = (0..d_llm * d_q).map(|_| rng.random_range(-a..a)).collect();
        Projector {
            weight: Matrix::from_vec(d_llm, d_q, data).expect("sized above"),
            bias: vec![0.0; d_llm],
        }
    }

    pub fn d_llm(&self) -> usize {
        self.weight.rows()
    }

    pub fn d_q(&self) -> usize {
        self.weight.cols()
    }
}

pub fn project(tokens: &Matrix, p: &Projector) -> Result<Matrix, ShapeError> {
    if tokens.cols() != p.d_q() {
        return Err(ShapeError::new("project", p.d_q(), tokens.cols()));
    }
    let mut out = Matrix::zeros(tokens.rows(), p.d_llm());
    for n in 0..tokens.rows() {
        let x = tokens.row(n);
        let y = out.row_mut(n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = p.bias[i] + crate::tensor::dot(p.weight.row(i), x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tok(e: Vec<f64>, r: [f64; 3]) -> QueryToken {
        QueryToken::new(e, r, None)
    }

    #[test]
    fn zero_rp_is_identity_on_embeddings() {
        let rp = RefPointProjector::zeros(3);
        let qs = vec![tok(vec![1.0, 2.0, 3.0], [5.0, -4.0, 0.0]), tok(vec![0.5, 0.0, -1.0], [0.0; 3])];
        let m = embed_tokens(&qs, &rp).unwrap();
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(m.row(1), &[0.5, 0.0, -1.0]);
    }

    #[test]
    fn rp_column_shift() {
        let mut rp = RefPointProjector::zeros(3);
        for i in 0..3 {
            rp.weight.set(i, i, 1.0);
        }
        rp.weight.set(2, 0, 7.0);
        let m = embed_tokens(&[tok(vec![0.0, 1.0, 2.0], [1.0, 0.0, 0.0])], &rp).unwrap();
        assert_eq!(m.row(0), &[1.0, 1.0, 9.0]);
    }

    #[test]
    fn empty_and_mismatched() {
        let rp = RefPointProjector::zeros(4);
        assert_eq!(embed_tokens(&[], &rp).unwrap().shape(), (0, 4));
        assert!(embed_tokens(&[tok(vec![1.0], [0.0; 3])], &rp).is_err());
        let p = Projector::zeros(6, 4);
        assert_eq!(project(&Matrix::zeros(0, 4), &p).unwrap().shape(), (0, 6));
        assert!(project(&Matrix::zeros(2, 3), &p).is_err());
    }

    #[test]
    fn zero_projector_gives_zero() {
        let p = Projector::zeros(5, 3);
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(project(&x, &p).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn project_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = Projector::random(7, 5, &mut rng);
        p.bias = (0..7).map(|i| i as f64 * 0.1).collect();
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = Matrix::from_vec(2, 5, x.clone()).unwrap();
        let y = project(&m, &p).unwrap();
        for n in 0..2 {
            for i in 0..7 {
                let mut acc = p.bias[i];
                for j in 0..5 {
                    acc += p.weight.data()[i * 5 + j] * x[n * 5 + j];
                }
                assert!((y.get(n, i) - acc).abs() < 1e-12);
            }
        }
    }
}
