//! Run manifests: every successful command writes `manifest.json` describing
//! the resolved configuration, master seed, and the files it produced, so a
//! run can be reproduced from its manifest alone.

use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    /// Full resolved configuration echo.
    pub resolved: serde_json::Value,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub master_seed: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config_path: Option<&Path>,
        resolved: serde_json::Value,
        master_seed: u64,
        outputs: &[PathBuf],
    ) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            resolved,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix,
            master_seed,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    /// Write `manifest.json` into `dir` and verify the listed outputs exist.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        for output in &self.outputs {
            if !Path::new(output).exists() {
                return Err(CliError::Numeric(format!(
                    "declared output `{output}` was not created"
                )));
            }
        }
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Numeric(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, body).map_err(|e| CliError::Numeric(format!("manifest write: {e}")))?;
        Ok(path)
    }
}
