//! Run manifests: every artifact-producing command writes `manifest.json`
//! and the fully resolved `config.toml` next to its outputs. Passing that
//! `config.toml` back with the same command and inputs repeats the run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{write, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: String,
    pub inputs: Vec<String>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: std::env::args().collect(),
            seed: cfg.seed,
            config: "config.toml".into(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path, cfg: &RunConfig) -> Result<()> {
        write(&dir.join("config.toml"), cfg.to_toml())?;
        write(&dir.join("manifest.json"), serde_json::to_string_pretty(self).expect("serializable") + "\n")
    }
}
