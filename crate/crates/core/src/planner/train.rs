use super::config::{PlannerConfig, TrainConfig};
use super::model::{Example, Model, SlotInput, SlotKind};
use super::optim::{clip_grad_norm, lr_at, AdamW};
use super::vocab::{PromptItem, Vocab, BOS, EOS, SEP};
use super::PlannerError;
use crate::qa::{QaRecord, Task};
use crate::scene::Scene;
use crate::tokens::QueryGenerator;
use crate::util::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Examples whose loss is tracked before and after training.
const PROBE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

/// Tokenize `record` and attach the simulated 3D tokens of its frame.
pub fn build_example(
    record: &QaRecord,
    scene: &Scene,
    config: &PlannerConfig,
    vocab: &Vocab,
    generator: &QueryGenerator,
) -> Result<Example, PlannerError> {
    let frame = record.meta.frame;
    if frame >= scene.frames.len() {
        return Err(PlannerError::Data(format!(
            "record names frame {frame} but scene {} has {}",
            record.meta.scene_id,
            scene.frames.len()
        )));
    }
    let mut prompt = vec![PromptItem::Token(BOS)];
    prompt.extend(vocab.encode_question(&record.question));
    prompt.push(PromptItem::Token(SEP));
    let n_slots = prompt.iter().filter(|p| matches!(p, PromptItem::Slot(_))).count();
    let tokens = if config.inject_queries {
        generator.planning_tokens(scene, record.meta.scene_id, frame, config.query_seed)
    } else {
        Default::default()
    };
    let slots = (0..n_slots)
        .map(|i| {
            let kind = match (record.task, i) {
                (Task::Planning, 1) | (Task::Lane, _) => SlotKind::Map,
                _ => SlotKind::Detection,
            };
            let queries = match kind {
                SlotKind::Detection if i == 0 => tokens.detection.clone(),
                SlotKind::Map if i <= 1 => tokens.map.clone(),
                _ => Vec::new(),
            };
            SlotInput { kind, queries }
        })
        .collect();
    let mut answer = vocab.encode_answer(&record.answer);
    answer.push(EOS);
    Ok(Example {
        prompt,
        slots,
        answer,
    })
}

/// Build examples for every record, looking scenes up by `meta.scene_id`.
pub fn build_examples(
    records: &[QaRecord],
    scenes: &[Scene],
    config: &PlannerConfig,
    vocab: &Vocab,
) -> Result<Vec<Example>, PlannerError> {
    let generator = QueryGenerator::new(config.queries.clone());
    records
        .par_iter()
        .map(|r| {
            let scene = scenes.get(r.meta.scene_id as usize).ok_or_else(|| {
                PlannerError::Data(format!(
                    "record names scene {} but only {} scenes given",
                    r.meta.scene_id,
                    scenes.len()
                ))
            })?;
            build_example(r, scene, config, vocab, &generator)
        })
        .collect()
}

fn mean_loss(model: &Model, examples: &[Example]) -> Result<f64, PlannerError> {
    let losses: Vec<f64> = examples
        .iter()
        .map(|e| model.loss(e))
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Teacher-forced training with batch size 1, AdamW and warm-up + cosine
/// decay. Deterministic for a fixed `seed`.
pub fn train(
    examples: &[Example],
    config: PlannerConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<(Model, TrainReport), PlannerError> {
    if examples.is_empty() {
        return Err(PlannerError::EmptyDataset);
    }
    train_cfg.validate()?;
    let mut model = Model::new(config, seed)?;
    let probe = &examples[..examples.len().min(PROBE)];
    let initial_loss = mean_loss(&model, probe)?;
    let mut opt = AdamW::new(&model.params);
    let total = train_cfg.epochs * examples.len();
    let mut step = 0;
    let mut epoch_losses = Vec::with_capacity(train_cfg.epochs);
    for epoch in 0..train_cfg.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &i in &order {
            let (loss, mut grads) = model.loss_and_grad(&examples[i])?;
            if !loss.is_finite() {
                return Err(PlannerError::Divergence { step, loss });
            }
            let norm = clip_grad_norm(&mut grads, train_cfg.grad_clip);
            if !norm.is_finite() {
                return Err(PlannerError::Divergence { step, loss: norm });
            }
            let lr = lr_at(step, total, train_cfg.learning_rate, train_cfg.warmup_frac);
            opt.step(&mut model.params, &grads, lr, train_cfg);
            sum += loss;
            step += 1;
        }
        epoch_losses.push(sum / examples.len() as f64);
    }
    if !model.params.is_finite() {
        return Err(PlannerError::Divergence {
            step,
            loss: f64::NAN,
        });
    }
    let final_loss = mean_loss(&model, probe)?;
    Ok((
        model,
        TrainReport {
            steps: step,
            initial_loss,
            final_loss,
            epoch_losses,
        },
    ))
}
