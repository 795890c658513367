//! Additive latency model.
//!
//! An architecture's latency is the sum of one lookup-table entry per layer,
//! keyed by (layer, operator, channel factor), plus a single scalar bias that
//! absorbs inter-layer communication overhead. The bias is calibrated from
//! measured latencies as the mean gap between measurement and table sum.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::space::{Architecture, ChannelFactor, Gene, OperatorId, SearchSpace};

/// A real value per (layer, operator, channel factor).
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(from = "Vec<TableEntry>", into = "Vec<TableEntry>")
)]
pub struct GeneTable {
    entries: BTreeMap<(u32, OperatorId, ChannelFactor), f64>,
}

/// Flat record form of one [`GeneTable`] entry.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableEntry {
    pub layer: u32,
    pub operator: OperatorId,
    pub channel_factor: ChannelFactor,
    pub value: f64,
}

/// Per-layer latencies in milliseconds.
pub type LatencyTable = GeneTable;

impl GeneTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: usize, gene: Gene, value: f64) {
        self.entries.insert((layer as u32, gene.op, gene.factor), value);
    }

    pub fn get(&self, layer: usize, gene: Gene) -> Result<f64> {
        self.entries
            .get(&(layer as u32, gene.op, gene.factor))
            .copied()
            .ok_or(Error::MissingEntry {
                layer,
                op: gene.op,
                factor: gene.factor,
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = TableEntry> + '_ {
        self.entries
            .iter()
            .map(|(&(layer, operator, channel_factor), &value)| TableEntry {
                layer,
                operator,
                channel_factor,
                value,
            })
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.entries.values_mut()
    }

    /// Sum of the entries selected by `arch`, one per layer.
    pub fn sum(&self, arch: &Architecture) -> Result<f64> {
        arch.genes
            .iter()
            .enumerate()
            .try_fold(0.0, |acc, (l, &g)| Ok(acc + self.get(l, g)?))
    }

    /// Checks that every gene reachable in `space` has an entry.
    pub fn covers(&self, space: &SearchSpace) -> Result<()> {
        for (l, layer) in space.layers().iter().enumerate() {
            for op in 0..layer.num_operators() as u16 {
                for &factor in space.channel_factors() {
                    self.get(l, Gene::new(op, factor))?;
                }
            }
        }
        Ok(())
    }

    /// Builds a table by evaluating `f` on every gene of `space`.
    pub fn tabulate<F>(space: &SearchSpace, mut f: F) -> Self
    where
        F: FnMut(usize, OperatorId, ChannelFactor) -> f64,
    {
        let mut table = Self::new();
        for (l, layer) in space.layers().iter().enumerate() {
            for op in 0..layer.num_operators() as u16 {
                for &factor in space.channel_factors() {
                    let gene = Gene::new(op, factor);
                    table.insert(l, gene, f(l, gene.op, factor));
                }
            }
        }
        table
    }
}

impl From<Vec<TableEntry>> for GeneTable {
    fn from(entries: Vec<TableEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| ((e.layer, e.operator, e.channel_factor), e.value))
                .collect(),
        }
    }
}

impl From<GeneTable> for Vec<TableEntry> {
    fn from(table: GeneTable) -> Self {
        table.iter().collect()
    }
}

/// An on-device (or simulated) latency observation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementRecord {
    pub arch: Architecture,
    pub measured_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfile {
    pub device_name: String,
    pub batch_size: u32,
    pub table: LatencyTable,
    pub bias_ms: f64,
    /// In-sample RMSE of the last calibration; `None` until calibrated.
    pub calibration_rmse_ms: Option<f64>,
}

impl DeviceProfile {
    pub fn new(device_name: impl Into<String>, batch_size: u32, table: LatencyTable) -> Self {
        Self {
            device_name: device_name.into(),
            batch_size,
            table,
            bias_ms: 0.0,
            calibration_rmse_ms: None,
        }
    }

    /// Table sum without the bias.
    pub fn uncalibrated_ms(&self, arch: &Architecture) -> Result<f64> {
        self.table.sum(arch)
    }

    /// Table sum plus bias, floored at zero.
    pub fn estimate_latency(&self, arch: &Architecture) -> Result<f64> {
        Ok((self.table.sum(arch)? + self.bias_ms).max(0.0))
    }

    /// Returns a copy whose bias is the mean of `measured - table sum` over
    /// `records`, with the in-sample RMSE recorded.
    pub fn calibrate_bias(&self, records: &[MeasurementRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument(
                "calibration needs at least one measurement".into(),
            ));
        }
        let sums = records
            .iter()
            .map(|r| self.table.sum(&r.arch))
            .collect::<Result<Vec<_>>>()?;
        let m = records.len() as f64;
        let bias = records
            .iter()
            .zip(&sums)
            .map(|(r, s)| r.measured_ms - s)
            .sum::<f64>()
            / m;
        let mut out = self.clone();
        out.bias_ms = bias;
        out.calibration_rmse_ms = Some(out.rmse(records)?);
        Ok(out)
    }

    /// Root-mean-square of `estimate - measured` over `records`.
    pub fn rmse(&self, records: &[MeasurementRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("rmse of zero records".into()));
        }
        let mut acc = 0.0;
        for r in records {
            let d = self.estimate_latency(&r.arch)? - r.measured_ms;
            acc += d * d;
        }
        Ok(libm::sqrt(acc / records.len() as f64))
    }

    /// Mean of `estimate - measured` over `records`.
    pub fn mean_residual(&self, records: &[MeasurementRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("mean residual of zero records".into()));
        }
        let mut acc = 0.0;
        for r in records {
            acc += self.estimate_latency(&r.arch)? - r.measured_ms;
        }
        Ok(acc / records.len() as f64)
    }
}
