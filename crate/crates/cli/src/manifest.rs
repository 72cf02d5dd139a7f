//! Run manifests: what was run, with which seed, and checksums of every file
//! written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    /// SHA-256 of the effective configuration as canonical JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub versions: Versions,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub rieszgrad: String,
    pub cli: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts written to one output directory.
pub struct Recorder {
    dir: PathBuf,
    command: String,
    config: serde_json::Value,
    seed: u64,
    started: String,
    artifacts: Vec<Artifact>,
}

impl Recorder {
    pub fn new(dir: &Path, command: &str, config: serde_json::Value, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        Ok(Recorder {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            seed,
            started: chrono::Utc::now().to_rfc3339(),
            artifacts: Vec::new(),
        })
    }

    /// Write `bytes` to `name` inside the output directory and record its checksum.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(path.clone(), e))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Emit(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::Emit(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Emit(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Emit(e.to_string()))?;
        self.write(name, &bytes)
    }

    /// Write `manifest.json` and return the manifest.
    pub fn finish(self) -> Result<ExperimentManifest, CliError> {
        self.finish_as("manifest.json")
    }

    pub fn finish_as(self, name: &str) -> Result<ExperimentManifest, CliError> {
        let canonical = serde_json::to_vec(&self.config).map_err(|e| CliError::Emit(e.to_string()))?;
        let manifest = ExperimentManifest {
            command: self.command,
            config_hash: sha256_hex(&canonical),
            config: self.config,
            seed: self.seed,
            versions: Versions {
                rieszgrad: rieszgrad::VERSION.to_string(),
                cli: env!("CARGO_PKG_VERSION").to_string(),
            },
            threads: rayon::current_num_threads(),
            started: self.started,
            finished: chrono::Utc::now().to_rfc3339(),
            artifacts: self.artifacts,
        };
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Emit(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Io(path, e))?;
        Ok(manifest)
    }
}
