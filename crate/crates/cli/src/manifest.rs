//! `manifest.json`, written next to the artifacts of every run.

use crate::error::{CliError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Fully resolved options, after flags, config file and defaults.
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
    pub started: String,
    pub finished: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: now(),
            finished: String::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.insert(role.to_string(), FileDigest { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.outputs.insert(role.to_string(), FileDigest { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished = now();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
