//! Per-run record of seed, configuration, data identity, host and outputs.
//! Every stage invocation merges its entry into `manifest.json` in the run
//! directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{host_info, HostInfo};
use crate::error::{AppError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub data_fingerprint: Option<String>,
    pub outputs: Vec<String>,
    pub finished_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub created_at: String,
    pub host: HostInfo,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            created_at: now(),
            host: host_info(),
            stages: BTreeMap::new(),
        }
    }

    /// Loads the run's manifest, or starts one. A run directory is tied to a
    /// single seed.
    pub fn load_or_new(dir: &Path, seed: u64) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(seed));
        }
        let text = fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text)?;
        if m.seed != seed {
            return Err(AppError::Config(format!(
                "run directory {} was created with seed {}, not {seed}",
                dir.display(),
                m.seed
            )));
        }
        m.host = host_info();
        Ok(m)
    }

    pub fn record(
        &mut self,
        stage: &str,
        argv: Vec<String>,
        config: serde_json::Value,
        data_fingerprint: Option<String>,
        outputs: &[PathBuf],
        run_dir: &Path,
    ) {
        let outputs = outputs
            .iter()
            .map(|p| p.strip_prefix(run_dir).unwrap_or(p).to_string_lossy().into_owned())
            .collect();
        self.stages.insert(
            stage.to_string(),
            StageRecord { argv, config, data_fingerprint, outputs, finished_at: now() },
        );
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        crate::binio::write_atomic(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(path)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
