//! JSON checkpoint with base64 little-endian `f64` tensors.

use super::config::PlannerConfig;
use super::model::Model;
use super::params::Params;
use super::vocab::Vocab;
use super::PlannerError;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::path::Path;

const FORMAT: &str = "atlasbench-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    /// `[rows, cols]`, row-major.
    pub shape: [usize; 2],
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: PlannerConfig,
    pub vocab: Vec<String>,
    pub seed: u64,
    pub step: u64,
    pub tensors: Vec<TensorRecord>,
}

fn encode_f64s(data: &[f64]) -> String {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f64s(name: &str, s: &str, n: usize) -> Result<Vec<f64>, PlannerError> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| PlannerError::Checkpoint(format!("{name}: {e}")))?;
    if bytes.len() != n * 8 {
        return Err(PlannerError::Checkpoint(format!(
            "{name}: {} bytes for {n} values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Checkpoint {
    pub fn from_model(model: &Model, seed: u64, step: u64) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            config: model.config.clone(),
            vocab: model.vocab.tokens().to_vec(),
            seed,
            step,
            tensors: model
                .params
                .named()
                .into_iter()
                .map(|(name, m)| TensorRecord {
                    name,
                    shape: [m.rows(), m.cols()],
                    data: encode_f64s(m.data()),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<Model, PlannerError> {
        if self.format != FORMAT {
            return Err(PlannerError::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        self.config.validate()?;
        let vocab = Vocab::from_tokens(self.vocab.clone())?;
        let mut params = Params::zeros(&self.config, vocab.len());
        let mut slots = params.named_mut();
        if slots.len() != self.tensors.len() {
            return Err(PlannerError::Checkpoint(format!(
                "expected {} tensors, found {}",
                slots.len(),
                self.tensors.len()
            )));
        }
        for ((name, m), rec) in slots.iter_mut().zip(&self.tensors) {
            if *name != rec.name || [m.rows(), m.cols()] != rec.shape {
                return Err(PlannerError::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} [{}, {}]",
                    rec.name,
                    rec.shape,
                    name,
                    m.rows(),
                    m.cols()
                )));
            }
            let data = decode_f64s(name, &rec.data, m.data().len())?;
            m.data_mut().copy_from_slice(&data);
        }
        drop(slots);
        Ok(Model {
            config: self.config.clone(),
            vocab,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PlannerError> {
        let text = serde_json::to_string(self).map_err(|e| PlannerError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PlannerError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PlannerError::Checkpoint(e.to_string()))
    }
}
