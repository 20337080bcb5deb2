//! Run manifests: what was run, with which configuration, producing which files.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_hash: String,
    /// Canonical configuration text; hashing it gives `config_hash`.
    pub config: String,
    pub seeds: Vec<u64>,
    pub duration_s: Option<f64>,
    pub effective_duration_s: Option<f64>,
    pub events: Option<u64>,
    pub truncated: bool,
    /// Tag counts per channel name.
    pub counts: BTreeMap<String, u64>,
    pub outputs: Vec<OutputFile>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &photosync_core::SystemConfig) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_hash: crate::config::config_hash(config),
            config: crate::config::to_canonical(config),
            seeds: Vec::new(),
            duration_s: None,
            effective_duration_s: None,
            events: None,
            truncated: false,
            counts: BTreeMap::new(),
            outputs: Vec::new(),
            started_unix_s: unix_now(),
            finished_unix_s: 0,
        }
    }

    /// Records an output file with its size and digest.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let bytes =
            std::fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
        self.outputs.push(OutputFile {
            path: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            bytes: bytes.len() as u64,
            sha256: crate::config::hex(&Sha256::digest(&bytes)),
        });
        Ok(())
    }

    /// Whether `config_hash` matches the embedded configuration text.
    pub fn is_consistent(&self) -> bool {
        crate::config::parse(&self.config)
            .is_ok_and(|c| crate::config::config_hash(&c) == self.config_hash)
    }

    /// Whether every listed output in `dir` still has its recorded size and digest.
    pub fn verify_outputs(&self, dir: &Path) -> Result<bool> {
        for o in &self.outputs {
            let p = dir.join(&o.path);
            let bytes = std::fs::read(&p).map_err(Error::io(format!("reading {}", p.display())))?;
            if bytes.len() as u64 != o.bytes
                || crate::config::hex(&Sha256::digest(&bytes)) != o.sha256
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix_s = unix_now();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(Error::io(format!("writing {}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(Error::io(format!("reading {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}
