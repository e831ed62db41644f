//! Per-command run manifests. Timestamps live here and nowhere else, so result
//! files stay byte-identical across reruns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub relgeo_version: String,
    pub cli_version: String,
    pub threads: usize,
    pub timestamp: String,
    /// Files written, relative to the output directory.
    pub outputs: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<PathBuf>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            relgeo_version: relgeo::VERSION.to_string(),
            cli_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs,
            config: cfg.clone(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<PathBuf> {
        let dir = out_dir.join("manifests");
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
