use crate::error::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Provenance written next to every subcommand's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_path: config_path.map(|p| p.display().to_string()),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&mut self, dir: &Path, inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
        self.inputs = inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?;
        self.outputs = outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?;
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
