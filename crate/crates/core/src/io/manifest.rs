//! Run manifests: everything needed to re-run a command bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{config_to_value, parse_config};
use crate::brownian::REFINEMENT_RULE_VERSION;
use crate::converge::Study;
use crate::error::{Error, Result};
use crate::integrator::SimConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The command a manifest describes, with its command-line parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunCommand {
    Simulate,
    Ensemble { paths: usize, p: Vec<f64> },
    Converge { study: Study, levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub artifact_version: String,
    pub format_version: u32,
    pub refinement_rule_version: u32,
    /// RFC 3339 creation time.
    pub created_at: String,
    pub master_seed: u64,
    pub command: RunCommand,
    pub config_echo: serde_json::Value,
    /// Output files written next to the manifest, relative to its directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &SimConfig, command: RunCommand, outputs: Vec<String>) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            format_version: MANIFEST_FORMAT_VERSION,
            refinement_rule_version: REFINEMENT_RULE_VERSION,
            created_at: chrono::Utc::now().to_rfc3339(),
            master_seed: cfg.seed,
            command,
            config_echo: config_to_value(cfg),
            outputs,
        }
    }

    /// The configuration echoed in the manifest, re-validated.
    pub fn config(&self) -> Result<SimConfig> {
        let cfg = parse_config(&self.config_echo.to_string())?;
        if cfg.seed != self.master_seed {
            return Err(Error::Format(format!(
                "manifest seed {} disagrees with its config seed {}",
                self.master_seed, cfg.seed
            )));
        }
        Ok(cfg)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MANIFEST_FORMAT_VERSION as u64) {
            return Err(Error::Version {
                found: version.map_or(0, |v| v as u32),
                expected: MANIFEST_FORMAT_VERSION,
            });
        }
        let rule = value.get("refinement_rule_version").and_then(|v| v.as_u64());
        if rule != Some(REFINEMENT_RULE_VERSION as u64) {
            return Err(Error::Version {
                found: rule.map_or(0, |v| v as u32),
                expected: REFINEMENT_RULE_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}
