//! Synthetic target devices.
//!
//! A [`SimDeviceConfig`] plays the role of real hardware: it knows the true
//! per-layer cost of every gene, adds a fixed overhead at each boundary
//! between adjacent layers and perturbs each measurement with Gaussian noise.
//! Because the overhead is known, the calibrated bias of the latency model
//! has a ground truth to be checked against.
//!
//! The three bundled templates (`sim-gpu`, `sim-cpu`, `sim-edge`) use
//! invented cost scales. They share one cost shape in which the
//! `shuffle_k7` and `shuffle_xception` operators have identical FLOPs but
//! clearly different latency.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::latency::{GeneTable, LatencyTable, MeasurementRecord};
use crate::rng::{child_seed, stream};
use crate::space::{scaled_channels, Architecture, Gene, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimDeviceConfig {
    pub name: String,
    pub batch_size: u32,
    pub seed: u64,
    pub base_cost: LatencyTable,
    /// Overhead added at every boundary between adjacent layers.
    pub boundary_overhead_ms: f64,
    /// Optional per-boundary additions on top of `boundary_overhead_ms`;
    /// empty for a homogeneous device, otherwise one value per boundary.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub boundary_extra_ms: Vec<f64>,
    pub noise_stddev_ms: f64,
    pub flops_proxy: GeneTable,
}

impl SimDeviceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        let bad = |x: f64| !(x.is_finite() && x >= 0.0);
        if bad(self.boundary_overhead_ms) || bad(self.noise_stddev_ms) {
            return Err(Error::InvalidArgument(
                "overhead and noise must be finite and non-negative".into(),
            ));
        }
        if self.base_cost.iter().any(|e| bad(e.value)) {
            return Err(Error::InvalidArgument("negative base cost".into()));
        }
        if self.boundary_extra_ms.iter().any(|&x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite boundary overhead".into()));
        }
        Ok(())
    }

    /// Total boundary overhead of a `depth`-layer architecture.
    pub fn overhead_ms(&self, depth: usize) -> f64 {
        let boundaries = depth.saturating_sub(1);
        let extra: f64 = self.boundary_extra_ms.iter().take(boundaries).sum();
        boundaries as f64 * self.boundary_overhead_ms + extra
    }

    /// Noise-free latency of `arch`.
    pub fn true_latency(&self, arch: &Architecture) -> Result<f64> {
        Ok(self.base_cost.sum(arch)? + self.overhead_ms(arch.len()))
    }

    /// One noisy measurement, floored at zero.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        arch: &Architecture,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        let mut ms = self.true_latency(arch)?;
        if self.noise_stddev_ms > 0.0 {
            let noise = Normal::new(0.0, self.noise_stddev_ms)
                .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
            ms += noise.sample(rng);
        }
        Ok(MeasurementRecord {
            arch: arch.clone(),
            measured_ms: ms.max(0.0),
        })
    }

    pub fn flops_of(&self, arch: &Architecture) -> Result<f64> {
        self.flops_proxy.sum(arch)
    }

    /// The per-layer costs alone, without overhead or noise.
    pub fn export_true_table(&self) -> LatencyTable {
        self.base_cost.clone()
    }

    /// Copy with heterogeneous boundary overheads: each boundary gets a
    /// seeded addition uniform in `[-spread, spread]` ms.
    pub fn with_heterogeneous_overheads(&self, depth: usize, spread_ms: f64) -> Self {
        let mut rng = stream(child_seed(self.seed, &[0x6865_7465]));
        let mut out = self.clone();
        out.boundary_extra_ms = (0..depth.saturating_sub(1))
            .map(|_| {
                let x = rng.random_range(-spread_ms..=spread_ms);
                x.max(-self.boundary_overhead_ms)
            })
            .collect();
        out
    }

    /// Architectures that use one gene on every layer. Handy for locating
    /// equal-FLOPs pairs, since the search space itself is too large to scan.
    pub fn homogeneous_architectures(space: &SearchSpace) -> Vec<Architecture> {
        let k = space.layers().iter().map(|l| l.num_operators()).min().unwrap_or(0);
        let mut out = Vec::new();
        for op in 0..k as u16 {
            for &factor in space.channel_factors() {
                out.push(Architecture::new(
                    core::iter::repeat_n(Gene::new(op, factor), space.depth()).collect(),
                ));
            }
        }
        out
    }

    /// Pairs from `candidates` with bit-identical FLOPs whose noise-free
    /// latencies differ by at least `min_ratio` (larger over smaller).
    pub fn equal_flops_divergent_pairs(
        &self,
        candidates: &[Architecture],
        min_ratio: f64,
    ) -> Result<Vec<(Architecture, Architecture)>> {
        let mut stats = Vec::with_capacity(candidates.len());
        for a in candidates {
            stats.push((self.flops_of(a)?, self.true_latency(a)?));
        }
        let mut out = Vec::new();
        for i in 0..candidates.len() {
            for j in i + 1..candidates.len() {
                let (fa, la) = stats[i];
                let (fb, lb) = stats[j];
                if fa == fb && fa > 0.0 {
                    let (lo, hi) = if la < lb { (la, lb) } else { (lb, la) };
                    if lo > 0.0 && hi / lo >= min_ratio {
                        out.push((candidates[i].clone(), candidates[j].clone()));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceTemplate {
    Gpu,
    Cpu,
    Edge,
}

struct TemplateParams {
    batch_size: u32,
    // full-width cost of a 3x3 block, ms
    scale_ms: f64,
    boundary_ms: f64,
    noise_ms: f64,
}

// Per-operator shape shared by all templates, indexed by operator id of the
// shufflenet-like space: (fixed cost, latency multiplier, flops multiplier).
// Operators beyond the table reuse the last row.
const OPERATOR_SHAPE: [(f64, f64, f64); 5] = [
    (0.05, 1.00, 1.00),
    (0.05, 1.15, 1.08),
    (0.05, 1.30, 1.30),
    (0.05, 1.80, 1.30),
    (0.02, 0.00, 0.00),
];

// Relative entry-to-entry variation, so tables are not perfectly smooth.
const ENTRY_JITTER: f64 = 0.04;

impl DeviceTemplate {
    pub const ALL: [DeviceTemplate; 3] = [Self::Gpu, Self::Cpu, Self::Edge];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gpu => "sim-gpu",
            Self::Cpu => "sim-cpu",
            Self::Edge => "sim-edge",
        }
    }

    fn params(self) -> TemplateParams {
        match self {
            Self::Gpu => TemplateParams {
                batch_size: 32,
                scale_ms: 1.085,
                boundary_ms: 0.05,
                noise_ms: 0.2,
            },
            Self::Cpu => TemplateParams {
                batch_size: 1,
                scale_ms: 2.77,
                boundary_ms: 0.15,
                noise_ms: 0.3,
            },
            Self::Edge => TemplateParams {
                batch_size: 16,
                scale_ms: 3.4,
                boundary_ms: 0.25,
                noise_ms: 0.8,
            },
        }
    }

    /// Builds a device for `space`. Costs depend on the scaled channel count
    /// of each layer, so rounding shows up in the table.
    pub fn build(self, space: &SearchSpace, seed: u64) -> SimDeviceConfig {
        let p = self.params();
        let mut rng = stream(seed);
        let shape = |op: usize| OPERATOR_SHAPE[op.min(OPERATOR_SHAPE.len() - 1)];
        let work = |l: usize, cf| {
            let max = space.layers()[l].max_channels;
            let r = f64::from(scaled_channels(max, cf)) / f64::from(max);
            0.35 * r + 0.65 * r * r
        };
        let base_cost = GeneTable::tabulate(space, |l, op, cf| {
            let (fixed, lat, _) = shape(op.index());
            let jitter = 1.0 + rng.random_range(-ENTRY_JITTER..=ENTRY_JITTER);
            p.scale_ms * (fixed + lat * work(l, cf)) * jitter
        });
        let flops_proxy = GeneTable::tabulate(space, |l, op, cf| {
            let (_, _, fl) = shape(op.index());
            let max = f64::from(space.layers()[l].max_channels);
            libm::round(fl * work(l, cf) * max * max)
        });
        SimDeviceConfig {
            name: self.name().into(),
            batch_size: p.batch_size,
            seed,
            base_cost,
            boundary_overhead_ms: p.boundary_ms,
            boundary_extra_ms: Vec::new(),
            noise_stddev_ms: p.noise_ms,
            flops_proxy,
        }
    }
}

impl fmt::Display for DeviceTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeviceTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown device template `{s}` (expected sim-gpu, sim-cpu or sim-edge)"
                ))
            })
    }
}
