//! Toy autoregressive planner: a small decoder-only transformer that reads a
//! tokenized question with 3D query rows spliced into its `<query>` slots and
//! writes a chain-of-thought planning answer.

mod checkpoint;
mod config;
mod model;
mod optim;
mod params;
mod train;
pub mod vocab;

pub use checkpoint::{Checkpoint, TensorRecord};
pub use config::{PlannerConfig, TrainConfig};
pub use model::{
    assemble_stream, cross_entropy, gradient_check, DecodeMode, Example, GradCheck, Generation,
    Model, SlotInput, SlotKind,
    StreamToken, TokenStream,
};
pub use optim::{clip_grad_norm, lr_at, warmup_steps, AdamW};
pub use params::{LayerParams, Params, SlotParams};
pub use train::{build_example, build_examples, train, TrainReport};
pub use vocab::{PromptItem, Vocab};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    Config(String),
    #[error("cannot assemble stream: {0}")]
    Assembly(String),
    #[error("stream of {len} tokens exceeds the context of {context}")]
    Length { len: usize, context: usize },
    #[error("answer has no tokens to score")]
    EmptyAnswer,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("training diverged at step {step} (value {loss})")]
    Divergence { step: usize, loss: f64 },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error(transparent)]
    Vocab(#[from] vocab::VocabError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
