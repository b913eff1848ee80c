//! Run provenance. This is the only bundle file allowed to hold wall-clock
//! times.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Done,
    /// A valid checkpoint from an earlier run was found.
    Resumed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub name: String,
    pub seed: u64,
    pub status: StageStatus,
    pub error: Option<String>,
    pub started: u64,
    pub finished: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub stage: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    /// Canonical TOML of the full config, defaults included.
    pub config: String,
    pub stages: Vec<StageEntry>,
    pub artifacts: Vec<Artifact>,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

impl Manifest {
    pub fn new(config: String, config_hash: String, master_seed: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: deid_audit::VERSION.to_string(),
            config_hash,
            master_seed,
            config,
            stages: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Replaces the previous entry and artifacts of the same stage so the
    /// manifest describes the bundle as it is on disk.
    pub fn record_stage(&mut self, entry: StageEntry, artifacts: Vec<Artifact>) {
        self.stages.retain(|s| s.name != entry.name);
        self.artifacts.retain(|a| a.stage != entry.name);
        self.stages.push(entry);
        self.artifacts.extend(artifacts);
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(out_dir.join(FILE), text + "\n")
    }

    pub fn read(out_dir: &Path) -> Option<Manifest> {
        let text = fs::read_to_string(out_dir.join(FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }
}
