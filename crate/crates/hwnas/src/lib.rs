//! File formats, a rayon-backed executor and the command implementations
//! for the `hwnas` tool. The search algorithms themselves live in
//! `hwnas-core`.

pub mod config;
pub mod formats;
pub mod manifest;
pub mod parallel;
pub mod pipeline;
pub mod render;
pub mod run;

pub use config::{DeviceSource, OracleSpec, RunConfig};
pub use formats::{Document, MeasurementLog};
pub use manifest::RunManifest;
pub use parallel::Pool;
