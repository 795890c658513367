use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Record of one CLI run. Output paths are relative to the manifest's own
/// directory. Anything that may differ between identical runs (timings,
/// worker count) lives under `metadata`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub jobs: usize,
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            ..Self::default()
        }
    }
}
