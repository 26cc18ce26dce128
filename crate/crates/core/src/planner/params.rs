//! Trainable tensors of the planner.

use super::config::PlannerConfig;
use super::vocab::Vocab;
use crate::tensor::Matrix;
use crate::tokens::RpEmbedding;
use crate::util::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LEARNED_STREAM: u64 = 0x1ea4_2ed0;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Matrix,
    pub ln1_b: Matrix,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ln2_g: Matrix,
    pub ln2_b: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

/// Per-slot-kind injection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotParams {
    /// Projector `[d_llm × d_q]` and bias `[1 × d_llm]`.
    pub proj_w: Matrix,
    pub proj_b: Matrix,
    /// Reference-point projector `[d_q × 3]` and bias `[1 × d_q]`.
    pub rp_w: Matrix,
    pub rp_b: Matrix,
    /// Per-row table `[context × d_q]`, empty unless the learned variant is used.
    pub learned: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok_emb: Matrix,
    pub pos_emb: Matrix,
    pub head_bias: Matrix,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Matrix,
    pub lnf_b: Matrix,
    /// Detection slot, then map slot.
    pub slots: [SlotParams; 2],
}

fn normal(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let n = Normal::new(0.0, std).expect("positive std");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(rng)).collect()).unwrap()
}

fn ones(cols: usize) -> Matrix {
    Matrix::from_vec(1, cols, vec![1.0; cols]).unwrap()
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-a..a)).collect()).unwrap()
}

/// Smooth sinusoidal codes so that neighbouring bins start out similar.
fn bin_code(bin: u32, d: usize, scale: f64) -> Vec<f64> {
    let half = (d / 2).max(1);
    (0..d)
        .map(|i| {
            let j = (i / 2) as f64;
            let period = 4.0 * 500f64.powf(j / (half.max(2) - 1) as f64);
            let phase = 2.0 * std::f64::consts::PI * bin as f64 / period;
            scale * if i % 2 == 0 { phase.sin() } else { phase.cos() }
        })
        .collect()
}

impl Params {
    /// Shapes for `config` and `vocab`, all zero.
    pub fn zeros(config: &PlannerConfig, vocab_len: usize) -> Self {
        let d = config.d_llm;
        let f = config.d_ff();
        let layer = || LayerParams {
            ln1_g: Matrix::zeros(1, d),
            ln1_b: Matrix::zeros(1, d),
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            ln2_g: Matrix::zeros(1, d),
            ln2_b: Matrix::zeros(1, d),
            w1: Matrix::zeros(f, d),
            b1: Matrix::zeros(1, f),
            w2: Matrix::zeros(d, f),
            b2: Matrix::zeros(1, d),
        };
        let learned_rows = if config.rp_embedding == RpEmbedding::Learned {
            config.context
        } else {
            0
        };
        let slot = || SlotParams {
            proj_w: Matrix::zeros(d, config.d_q),
            proj_b: Matrix::zeros(1, d),
            rp_w: Matrix::zeros(config.d_q, 3),
            rp_b: Matrix::zeros(1, config.d_q),
            learned: Matrix::zeros(learned_rows, config.d_q),
        };
        Params {
            tok_emb: Matrix::zeros(vocab_len, d),
            pos_emb: Matrix::zeros(config.context, d),
            head_bias: Matrix::zeros(1, vocab_len),
            layers: (0..config.layers).map(|_| layer()).collect(),
            lnf_g: Matrix::zeros(1, d),
            lnf_b: Matrix::zeros(1, d),
            slots: [slot(), slot()],
        }
    }

    /// Random initialization. Reference-point projectors start at exactly
    /// zero and draw nothing from the generator, so every variant shares the
    /// remaining weights bit for bit.
    pub fn init(config: &PlannerConfig, vocab: &Vocab, seed: u64) -> Self {
        let d = config.d_llm;
        let f = config.d_ff();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(config, vocab.len());
        p.tok_emb = normal(vocab.len(), d, 0.02, &mut rng);
        for b in 0..1000 {
            let id = vocab.bin_id(b) as usize;
            p.tok_emb.row_mut(id).copy_from_slice(&bin_code(b, d, 0.05));
        }
        p.pos_emb = normal(config.context, d, 0.02, &mut rng);
        let s_in = 1.0 / (d as f64).sqrt();
        let s_out = s_in / (2.0 * config.layers as f64).sqrt();
        for l in p.layers.iter_mut() {
            l.ln1_g = ones(d);
            l.ln2_g = ones(d);
            l.wq = normal(d, d, s_in, &mut rng);
            l.wk = normal(d, d, s_in, &mut rng);
            l.wv = normal(d, d, s_in, &mut rng);
            l.wo = normal(d, d, s_out, &mut rng);
            l.w1 = normal(f, d, s_in, &mut rng);
            l.w2 = normal(d, f, s_out * (d as f64 / f as f64).sqrt(), &mut rng);
        }
        p.lnf_g = ones(d);
        for s in p.slots.iter_mut() {
            s.proj_w = glorot(d, config.d_q, &mut rng);
        }
        if config.rp_embedding == RpEmbedding::Learned {
            let mut side = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[LEARNED_STREAM]));
            for s in p.slots.iter_mut() {
                s.learned = normal(config.context, config.d_q, 0.02, &mut side);
            }
        }
        p
    }

    /// Every tensor with a stable name, in checkpoint order.
    pub fn named(&self) -> Vec<(String, &Matrix)> {
        let mut v: Vec<(String, &Matrix)> = vec![
            ("tok_emb".into(), &self.tok_emb),
            ("pos_emb".into(), &self.pos_emb),
            ("head_bias".into(), &self.head_bias),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, m) in [
                ("ln1_g", &l.ln1_g),
                ("ln1_b", &l.ln1_b),
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("ln2_g", &l.ln2_g),
                ("ln2_b", &l.ln2_b),
                ("w1", &l.w1),
                ("b1", &l.b1),
                ("w2", &l.w2),
                ("b2", &l.b2),
            ] {
                v.push((format!("layer{i}.{n}"), m));
            }
        }
        v.push(("lnf_g".into(), &self.lnf_g));
        v.push(("lnf_b".into(), &self.lnf_b));
        for (k, s) in ["det", "map"].iter().zip(&self.slots) {
            for (n, m) in [
                ("proj_w", &s.proj_w),
                ("proj_b", &s.proj_b),
                ("rp_w", &s.rp_w),
                ("rp_b", &s.rp_b),
                ("learned", &s.learned),
            ] {
                v.push((format!("{k}.{n}"), m));
            }
        }
        v
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut v: Vec<(String, &mut Matrix)> = vec![
            ("tok_emb".into(), &mut self.tok_emb),
            ("pos_emb".into(), &mut self.pos_emb),
            ("head_bias".into(), &mut self.head_bias),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (n, m) in [
                ("ln1_g", &mut l.ln1_g),
                ("ln1_b", &mut l.ln1_b),
                ("wq", &mut l.wq),
                ("wk", &mut l.wk),
                ("wv", &mut l.wv),
                ("wo", &mut l.wo),
                ("ln2_g", &mut l.ln2_g),
                ("ln2_b", &mut l.ln2_b),
                ("w1", &mut l.w1),
                ("b1", &mut l.b1),
                ("w2", &mut l.w2),
                ("b2", &mut l.b2),
            ] {
                v.push((format!("layer{i}.{n}"), m));
            }
        }
        v.push(("lnf_g".into(), &mut self.lnf_g));
        v.push(("lnf_b".into(), &mut self.lnf_b));
        for (k, s) in ["det", "map"].iter().zip(self.slots.iter_mut()) {
            for (n, m) in [
                ("proj_w", &mut s.proj_w),
                ("proj_b", &mut s.proj_b),
                ("rp_w", &mut s.rp_w),
                ("rp_b", &mut s.rp_b),
                ("learned", &mut s.learned),
            ] {
                v.push((format!("{k}.{n}"), m));
            }
        }
        v
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, m)| m.data().len()).sum()
    }

    pub fn zero(&mut self) {
        for (_, m) in self.named_mut() {
            m.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, m)| m.is_finite())
    }

    /// Whether the tensor named `name` is exempt from weight decay.
    pub fn no_decay(name: &str) -> bool {
        let leaf = name.rsplit('.').next().unwrap_or(name);
        leaf.starts_with("ln")
            || leaf.starts_with('b')
            || leaf.ends_with("_b")
            || leaf == "head_bias"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rp_starts_at_zero_and_variants_share_weights() {
        let v = Vocab::build();
        let rp = PlannerConfig::default();
        let none = PlannerConfig {
            rp_embedding: RpEmbedding::None,
            ..rp.clone()
        };
        let a = Params::init(&rp, &v, 3);
        let b = Params::init(&none, &v, 3);
        assert_eq!(a, b);
        for s in &a.slots {
            assert!(s.rp_w.data().iter().all(|&x| x == 0.0));
            assert!(s.rp_b.data().iter().all(|&x| x == 0.0));
        }
        let learned = Params::init(
            &PlannerConfig {
                rp_embedding: RpEmbedding::Learned,
                ..rp
            },
            &v,
            3,
        );
        assert_eq!(learned.tok_emb, a.tok_emb);
        assert_eq!(learned.slots[0].proj_w, a.slots[0].proj_w);
        assert_eq!(learned.slots[0].learned.rows(), 512);
    }

    #[test]
    fn names_unique_and_decay_groups() {
        let p = Params::zeros(&PlannerConfig::default(), 10);
        let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        let mut d = names.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), names.len());
        assert!(Params::no_decay("layer0.ln1_g"));
        assert!(Params::no_decay("layer1.b2"));
        assert!(Params::no_decay("det.proj_b"));
        assert!(!Params::no_decay("layer0.wq"));
        assert!(!Params::no_decay("det.rp_w"));
    }
}
