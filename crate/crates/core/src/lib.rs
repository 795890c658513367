//! Hardware-aware neural architecture search over a layered
//! operator-and-channel design space.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the pure
//! algorithmic pieces:
//!
//! * [`space`]: the design space, architectures, restriction and sampling.
//! * [`latency`]: additive lookup-table latency model with a calibrated bias.
//! * [`sim`]: a synthetic target device producing ground-truth measurements.
//! * [`objective`]: the latency-penalized accuracy objective and accuracy oracles.
//! * [`shrink`]: subspace quality estimation and progressive, layer-by-layer
//!   space shrinking.
//! * [`evolve`]: evolutionary search and the exhaustive verification oracle.
//!
//! IO, file formats and the command line live in the `hwnas` crate.
#![no_std]

extern crate alloc;

mod error;
pub mod exec;
pub mod evolve;
pub mod latency;
pub mod objective;
pub mod rng;
pub mod shrink;
pub mod sim;
pub mod space;

#[cfg(feature = "serde")]
mod bigstr;

pub use error::{Error, Result};
pub use evolve::{
    evolve, exhaustive_argmax, latency_histogram, EaConfig, HistogramSpec, Individual,
    MutationScope, SearchReport,
};
pub use exec::{Executor, Sequential};
pub use latency::{DeviceProfile, GeneTable, LatencyTable, MeasurementRecord};
pub use objective::{
    AccuracyOracle, ConstantOracle, Evaluation, Objective, ObjectiveConfig, ScoreCache,
    SurrogateOracle, SurrogateParams, TabularOracle,
};
pub use shrink::{
    estimate_quality, run_shrink, shrink_layer, LayerRecord, QualityEstimate, ShrinkPlan,
    ShrinkTrace,
};
pub use sim::{DeviceTemplate, SimDeviceConfig};
pub use space::{
    scaled_channels, Architecture, ChannelFactor, Gene, LayerSpec, OperatorId, SearchSpace,
};
