use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::CliResult;

/// Record written next to every set of command outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub base_seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub tool_version: String,
    /// SHA-256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    /// Outputs holding wall-clock measurements, which differ between reruns.
    pub timing_outputs: Vec<String>,
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn digest_file(path: &Path) -> CliResult<String> {
    Ok(format!("{:x}", Sha256::digest(std::fs::read(path)?)))
}

impl RunManifest {
    pub fn start(config: serde_json::Value, base_seed: Option<u64>) -> Self {
        RunManifest {
            command: std::env::args().skip(1).collect(),
            config,
            base_seed,
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: BTreeMap::new(),
            timing_outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) -> CliResult<()> {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.outputs.insert(name, digest_file(path)?);
        Ok(())
    }

    /// Stamp the end time and write the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> CliResult<PathBuf> {
        self.finished_unix_ms = now_ms();
        std::fs::write(path, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(path.to_path_buf())
    }
}

/// Manifest path for a single output file: `<file>.manifest.json`.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
