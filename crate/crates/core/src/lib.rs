//! Core library for a desk-scale 3D-tokenized language-model driving stack.
//!
//! * [`bev`]: coordinate conventions and 1000-bin discretization.
//! * [`scene`]: deterministic synthetic scene generator and its JSONL format.
//! * [`qa`]: question/answer text protocol for detection, lanes and planning.
//! * [`tokens`]: 3D query tokens, reference-point embedding, memory queue, projector.
//! * [`planner`]: small decoder-only transformer with injected 3D tokens.
//! * [`metrics`]: open-loop planning L2 / collision rate, detection and lane F1.

pub mod bev;
pub mod geom;
pub mod metrics;
pub mod planner;
pub mod qa;
pub mod scene;
pub mod tensor;
pub mod tokens;
pub mod util;

pub use bev::{BevPoint, BinIndex, BinSpec};
pub use scene::{Scene, SceneConfig};
