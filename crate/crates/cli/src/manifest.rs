use std::collections::BTreeMap;
use std::path::Path;

use confbin::io::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub protocol: String,
    pub stage_label: String,
    pub train_fraction: f64,
    pub wer: f64,
}

/// Record of one command invocation. Everything except `timings` is a
/// function of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub protocol: Option<String>,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    /// Oracle labels requested by the run.
    pub annotation_budget: Option<usize>,
    pub stages: Vec<StageRow>,
    /// Wall-clock seconds per step.
    pub timings: BTreeMap<String, f64>,
    /// sha256 of every emitted file, keyed by file name.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, protocol: Option<String>, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            protocol,
            master_seed: config.master_seed,
            config: config.clone(),
            annotation_budget: None,
            stages: Vec::new(),
            timings: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    /// Writes `bytes` to `dir/name` and records its hash.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&dir.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(confbin::Error::from)?;
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::MissingData(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text).map_err(confbin::Error::from)?)
    }

    /// Checks that every listed file still has the recorded hash.
    pub fn verify(&self, dir: &Path) -> Result<(), CliError> {
        for (name, want) in &self.files {
            let path = dir.join(name);
            let bytes = std::fs::read(&path)
                .map_err(|e| CliError::ManifestMismatch(format!("{}: {e}", path.display())))?;
            if &sha256_hex(&bytes) != want {
                return Err(CliError::ManifestMismatch(format!("{} does not match its recorded hash", path.display())));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
