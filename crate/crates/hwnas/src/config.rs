use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use hwnas_core::{EaConfig, ObjectiveConfig, ShrinkPlan, SurrogateParams};

/// A complete run description. Relative paths resolve against the directory
/// holding the config file. Module seeds are derived from `seed`, so any
/// `ea.seed` given here is replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Space document; the built-in 20-layer space when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<PathBuf>,
    #[serde(default)]
    pub device: DeviceSource,
    /// Calibrated profile; built by simulation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
    #[serde(default = "default_measurements")]
    pub measurements: usize,
    #[serde(default)]
    pub holdout: usize,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub shrink: ShrinkPlan,
    #[serde(default)]
    pub ea: EaConfig,
}

fn default_measurements() -> usize {
    100
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            space: None,
            device: DeviceSource::default(),
            profile: None,
            measurements: default_measurements(),
            holdout: 0,
            objective: ObjectiveConfig::default(),
            oracle: OracleSpec::default(),
            shrink: ShrinkPlan::default(),
            ea: EaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceSource {
    /// One of `sim-gpu`, `sim-cpu`, `sim-edge`.
    Template(String),
    Path(PathBuf),
}

impl Default for DeviceSource {
    fn default() -> Self {
        Self::Template("sim-edge".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleSpec {
    Surrogate {
        #[serde(flatten)]
        params: SurrogateParams,
    },
    Constant {
        accuracy: f64,
    },
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self::Surrogate {
            params: SurrogateParams::default(),
        }
    }
}
