//! Run manifests written next to every output directory.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::plan::{ExperimentPlan, PlanFile, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub commit: String,
    pub plan: ExperimentPlan,
}

impl RunManifest {
    pub fn new(command: &str, plan: ExperimentPlan) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: plan.seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            commit: commit_id(),
            plan,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Internal(format!("manifest: {e}")))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_toml()?).map_err(|e| HarnessError::write(&path, e))
    }
}

/// Git commit of the working directory, or `"unknown"` outside a checkout.
pub fn commit_id() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Reads a plan file, or the `[plan]` table of a manifest.
pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_plan(&text)
}

pub fn parse_plan(text: &str) -> Result<ExperimentPlan> {
    let value: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| HarnessError::Config(format!("plan: {}", e.message())))?;
    if value.contains_key("plan") && value.contains_key("tool_version") {
        let manifest: RunManifest = toml::from_str(text)
            .map_err(|e| HarnessError::Config(format!("manifest: {}", e.message())))?;
        if manifest.schema != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported manifest schema {}",
                manifest.schema
            )));
        }
        manifest.plan.validate()?;
        return Ok(manifest.plan);
    }
    PlanFile::from_toml(text)?.resolve()
}
