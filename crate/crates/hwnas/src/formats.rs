//! On-disk documents. Every JSON file is an envelope
//! `{"schema": "hwnas.<kind>/v1", "data": ...}` so a reader can tell what it
//! holds before parsing the payload.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hwnas_core::{
    DeviceProfile, MeasurementRecord, SearchReport, SearchSpace, ShrinkTrace, SimDeviceConfig,
};

use crate::config::RunConfig;
use crate::manifest::RunManifest;

pub trait Document: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn schema() -> String {
        format!("hwnas.{}/v1", Self::KIND)
    }
}

impl Document for SearchSpace {
    const KIND: &'static str = "space";
}
impl Document for SimDeviceConfig {
    const KIND: &'static str = "device";
}
impl Document for DeviceProfile {
    const KIND: &'static str = "profile";
}
impl Document for ShrinkTrace {
    const KIND: &'static str = "shrink-trace";
}
impl Document for SearchReport {
    const KIND: &'static str = "search-report";
}
impl Document for RunConfig {
    const KIND: &'static str = "config";
}
impl Document for RunManifest {
    const KIND: &'static str = "manifest";
}
impl Document for MeasurementLog {
    const KIND: &'static str = "measurements";
}

/// Architectures measured while profiling a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementLog {
    pub device_name: String,
    pub seed: u64,
    pub calibration: Vec<MeasurementRecord>,
    #[serde(default)]
    pub holdout: Vec<MeasurementRecord>,
    #[serde(default)]
    pub holdout_rmse_ms: Option<f64>,
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    schema: String,
    data: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    schema: String,
    data: T,
}

pub fn to_json<T: Document>(doc: &T) -> Result<String> {
    let env = EnvelopeOut {
        schema: T::schema(),
        data: doc,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn write<T: Document>(path: &Path, doc: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = to_json(doc)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read<T: Document>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn from_json<T: Document>(text: &str) -> Result<T> {
    let env: EnvelopeIn<T> = serde_json::from_str(text)?;
    if env.schema != T::schema() {
        bail!("expected schema {}, found {}", T::schema(), env.schema);
    }
    Ok(env.data)
}

/// The schema tag of a document without parsing its payload.
pub fn peek_schema(path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct Tag {
        schema: String,
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tag: Tag = serde_json::from_str(&text)
        .with_context(|| format!("{} has no schema tag", path.display()))?;
    Ok(tag.schema)
}

/// Resolves `p` against `base` unless it is already absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
