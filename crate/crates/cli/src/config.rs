//! TOML run configuration and command-line overrides.

use crate::error::CliError;
use atlasbench_core::metrics::{EgoFootprint, EvalOptions, L2Convention};
use atlasbench_core::planner::{PlannerConfig, TrainConfig};
use atlasbench_core::scene::SceneConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub method: String,
    pub l2_convention: L2Convention,
    /// `[length, width]` of the ego footprint in meters.
    pub ego_dims: [f64; 2],
}

impl Default for EvalSection {
    fn default() -> Self {
        let fp = EgoFootprint::default();
        EvalSection {
            method: "atlasbench".into(),
            l2_convention: L2Convention::Stp3,
            ego_dims: [fp.length, fp.width],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub planner: PlannerConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn eval_options(&self) -> Result<EvalOptions, CliError> {
        let [l, w] = self.eval.ego_dims;
        Ok(EvalOptions {
            method: self.eval.method.clone(),
            l2_convention: self.eval.l2_convention,
            footprint: EgoFootprint::new(l, w).map_err(|e| CliError::Usage(e.to_string()))?,
        })
    }
}

/// Parse `LxW` or `L,W` in meters.
pub fn parse_ego_dims(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
    let bad = || format!("expected LENGTHxWIDTH in meters, got {s:?}");
    if parts.len() != 2 {
        return Err(bad());
    }
    let l: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let w: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(l > 0.0 && w > 0.0 && l.is_finite() && w.is_finite()) {
        return Err(format!("ego dimensions must be positive, got {s:?}"));
    }
    Ok([l, w])
}
