//! Run manifests: what was run, with which configuration and seeds.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::{hex, to_json};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Versions {
    pub hoptomo: String,
    pub hoptomo_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            hoptomo: env!("CARGO_PKG_VERSION").to_string(),
            hoptomo_core: hoptomo_core::VERSION.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    /// SHA-256 of the canonical JSON configuration.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub versions: Versions,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub created: u64,
}

/// Hash of the compact JSON serialization (struct field order is fixed).
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("JSON values serialize");
    hex(&Sha256::digest(text.as_bytes()))
}

impl Manifest {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seeds: Vec<u64>,
        outputs: Vec<String>,
    ) -> Self {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config_hash: config_hash(&config),
            config,
            seeds,
            versions: Versions::current(),
            outputs,
            created,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, to_json(self)?).map_err(CliError::from_io)
    }
}

/// `out.csv` → `out.csv.manifest.json`; without an output file the
/// manifest goes to `hoptomo-<command>.manifest.json` in the working
/// directory.
pub fn manifest_path(command: &str, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("hoptomo-{command}.manifest.json")),
    }
}
