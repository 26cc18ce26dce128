use crate::qa::ChainSpec;
use crate::tokens::{QuerySimConfig, RpEmbedding};
use serde::{Deserialize, Serialize};

use super::PlannerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub d_q: usize,
    pub d_llm: usize,
    pub layers: usize,
    pub heads: usize,
    /// Maximum stream length, prompt and answer together.
    pub context: usize,
    pub mlp_ratio: usize,
    pub chain: ChainSpec,
    pub rp_embedding: RpEmbedding,
    /// When false, every `<query>` slot is left empty (text-only ablation).
    pub inject_queries: bool,
    /// Seed of the simulated tokenizer noise.
    pub query_seed: u64,
    pub queries: QuerySimConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            d_q: 32,
            d_llm: 64,
            layers: 2,
            heads: 4,
            context: 512,
            mlp_ratio: 4,
            chain: ChainSpec::vap(),
            rp_embedding: RpEmbedding::Rp,
            inject_queries: true,
            query_seed: 0,
            queries: QuerySimConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: String| Err(PlannerError::Config(m));
        if self.d_llm == 0 || self.heads == 0 || !self.d_llm.is_multiple_of(self.heads) {
            return bad(format!(
                "d_llm ({}) must be a positive multiple of heads ({})",
                self.d_llm, self.heads
            ));
        }
        if self.d_q == 0 || self.layers == 0 || self.mlp_ratio == 0 {
            return bad("d_q, layers and mlp_ratio must be positive".into());
        }
        if self.d_q != self.queries.d_q {
            return bad(format!(
                "d_q ({}) differs from queries.d_q ({})",
                self.d_q, self.queries.d_q
            ));
        }
        if self.context < 16 {
            return bad(format!("context {} is too short", self.context));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_llm / self.heads
    }

    pub fn d_ff(&self) -> usize {
        self.d_llm * self.mlp_ratio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    /// Fraction of total steps spent in linear warm-up.
    pub warmup_frac: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 1,
            warmup_frac: 0.03,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && (0.0..=1.0).contains(&self.warmup_frac)
            && self.epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(PlannerError::Config(format!("invalid training config {self:?}")))
        }
    }
}
