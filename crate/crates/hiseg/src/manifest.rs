use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_text, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Version of the on-disk artifact formats.
pub const ARTIFACT_VERSION: u32 = 1;

/// Record written next to the outputs of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name, with config files expanded.
    pub argv: Vec<String>,
    pub params: serde_json::Value,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub artifact_version: u32,
    pub duration_ms: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::io(path, e))
    }
}
