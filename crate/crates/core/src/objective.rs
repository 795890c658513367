//! Latency-penalized accuracy objective and accuracy oracles.
//!
//! The score of an architecture is its accuracy plus `beta` times the
//! relative distance of its estimated latency from the target:
//!
//! ```text
//! score = acc + beta * |lat / target - 1|      (beta < 0)
//! ```
//!
//! Accuracy comes from an [`AccuracyOracle`]. No network is trained here;
//! oracles are deterministic maps from architecture to `[0, 1]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::latency::{DeviceProfile, GeneTable};
use crate::rng::stream;
use crate::space::{Architecture, OperatorId, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectiveConfig {
    pub target_latency_ms: f64,
    pub beta: f64,
    /// Penalize only latency above the target.
    #[cfg_attr(feature = "serde", serde(default))]
    pub one_sided_penalty: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            target_latency_ms: 34.0,
            beta: -0.1,
            one_sided_penalty: false,
        }
    }
}

impl ObjectiveConfig {
    pub fn new(target_latency_ms: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            target_latency_ms,
            beta,
            one_sided_penalty: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_latency_ms.is_finite() && self.target_latency_ms > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "target latency must be positive, got {}",
                self.target_latency_ms
            )));
        }
        if !(self.beta.is_finite() && self.beta < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be strictly negative, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// The `beta * |lat / target - 1|` term (non-positive).
    pub fn penalty(&self, latency_ms: f64) -> f64 {
        let rel = latency_ms / self.target_latency_ms - 1.0;
        let miss = if self.one_sided_penalty {
            rel.max(0.0)
        } else {
            rel.abs()
        };
        self.beta * miss
    }

    pub fn combine(&self, accuracy: f64, latency_ms: f64) -> f64 {
        accuracy + self.penalty(latency_ms)
    }
}

/// Deterministic accuracy in `[0, 1]` for an architecture.
pub trait AccuracyOracle: Send + Sync {
    fn evaluate(&self, arch: &Architecture) -> Result<f64>;
}

impl<T: AccuracyOracle + ?Sized> AccuracyOracle for &T {
    fn evaluate(&self, arch: &Architecture) -> Result<f64> {
        (**self).evaluate(arch)
    }
}

/// Same accuracy for every architecture; isolates the latency penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantOracle(pub f64);

impl AccuracyOracle for ConstantOracle {
    fn evaluate(&self, _arch: &Architecture) -> Result<f64> {
        Ok(self.0)
    }
}

/// Accuracy looked up from an explicit per-architecture table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularOracle {
    table: BTreeMap<Architecture, f64>,
}

impl TabularOracle {
    pub fn new(entries: impl IntoIterator<Item = (Architecture, f64)>) -> Result<Self> {
        let table: BTreeMap<_, _> = entries.into_iter().collect();
        if let Some((_, acc)) = table.iter().find(|(_, a)| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Oracle(format!("accuracy {acc} outside [0, 1]")));
        }
        Ok(Self { table })
    }

    /// Tabulates another oracle over every architecture of `space`.
    pub fn exhaustive<O: AccuracyOracle + ?Sized>(space: &SearchSpace, oracle: &O) -> Result<Self> {
        let entries = space
            .architectures()
            .map(|a| oracle.evaluate(&a).map(|acc| (a, acc)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Architecture, f64)> {
        self.table.iter().map(|(a, &v)| (a, v))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl AccuracyOracle for TabularOracle {
    fn evaluate(&self, arch: &Architecture) -> Result<f64> {
        self.table
            .get(arch)
            .copied()
            .ok_or_else(|| Error::Oracle("architecture not in accuracy table".into()))
    }
}

/// Cross-layer interaction between two operator choices.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairWeight {
    pub layer_a: u32,
    pub op_a: OperatorId,
    pub layer_b: u32,
    pub op_b: OperatorId,
    pub weight: f64,
}

/// Synthetic accuracy landscape: logistic of an intercept, one weight per
/// gene and a sparse set of cross-layer operator interactions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateOracle {
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub intercept: f64,
    pub unary_weights: GeneTable,
    pub pairwise_weights: Vec<PairWeight>,
}

/// Knobs for [`SurrogateOracle::generate`]. All weights live on the logit
/// scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SurrogateParams {
    pub intercept: f64,
    /// Stddev of the per-(layer, operator) quality.
    pub operator_spread: f64,
    /// Logit gain from the smallest to the full channel factor.
    pub channel_gain: f64,
    /// Stddev of independent per-gene noise.
    pub entry_noise: f64,
    /// Number of cross-layer interaction terms.
    pub pairs: usize,
    pub pair_spread: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            intercept: 1.05,
            operator_spread: 0.02,
            channel_gain: 0.01,
            entry_noise: 0.002,
            pairs: 40,
            pair_spread: 0.01,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

impl SurrogateOracle {
    pub fn generate(space: &SearchSpace, seed: u64, params: &SurrogateParams) -> Self {
        let mut rng = stream(seed);
        let normal = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite stddev");
        let op_dist = normal(params.operator_spread);
        let noise = normal(params.entry_noise);
        let quality: Vec<Vec<f64>> = space
            .layers()
            .iter()
            .map(|l| (0..l.num_operators()).map(|_| op_dist.sample(&mut rng)).collect())
            .collect();
        let factors = space.channel_factors();
        let (lo, hi) = (
            libm::sqrt(factors[0].value()),
            libm::sqrt(factors[factors.len() - 1].value()),
        );
        let span = if hi > lo { hi - lo } else { 1.0 };
        let unary_weights = GeneTable::tabulate(space, |l, op, cf| {
            let width = (libm::sqrt(cf.value()) - lo) / span - 0.5;
            quality[l][op.index()] + params.channel_gain * width + noise.sample(&mut rng)
        });
        let pair_dist = normal(params.pair_spread);
        let depth = space.depth();
        let mut pairwise_weights = Vec::new();
        if depth >= 2 {
            for _ in 0..params.pairs {
                let a = rng.random_range(0..depth);
                let mut b = rng.random_range(0..depth - 1);
                if b >= a {
                    b += 1;
                }
                let (a, b) = (a.min(b), a.max(b));
                let op_a = rng.random_range(0..space.layers()[a].num_operators()) as u16;
                let op_b = rng.random_range(0..space.layers()[b].num_operators()) as u16;
                pairwise_weights.push(PairWeight {
                    layer_a: a as u32,
                    op_a: OperatorId(op_a),
                    layer_b: b as u32,
                    op_b: OperatorId(op_b),
                    weight: pair_dist.sample(&mut rng),
                });
            }
        }
        Self {
            seed,
            intercept: params.intercept,
            unary_weights,
            pairwise_weights,
        }
    }

    /// The pre-squashing sum.
    pub fn logit(&self, arch: &Architecture) -> Result<f64> {
        let mut z = self.intercept + self.unary_weights.sum(arch)?;
        for p in &self.pairwise_weights {
            let hit = |layer: u32, op: OperatorId| {
                arch.genes.get(layer as usize).is_some_and(|g| g.op == op)
            };
            if hit(p.layer_a, p.op_a) && hit(p.layer_b, p.op_b) {
                z += p.weight;
            }
        }
        Ok(z)
    }
}

impl AccuracyOracle for SurrogateOracle {
    fn evaluate(&self, arch: &Architecture) -> Result<f64> {
        Ok(logistic(self.logit(arch)?))
    }
}

/// Score of one architecture together with its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub score: f64,
    pub latency_ms: f64,
    pub accuracy: f64,
}

/// An [`ObjectiveConfig`] bound to a device profile and an oracle.
#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub config: ObjectiveConfig,
    pub profile: &'a DeviceProfile,
    pub oracle: &'a dyn AccuracyOracle,
}

impl<'a> Objective<'a> {
    pub fn new(
        config: ObjectiveConfig,
        profile: &'a DeviceProfile,
        oracle: &'a dyn AccuracyOracle,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            profile,
            oracle,
        })
    }

    pub fn score(&self, arch: &Architecture) -> Result<Evaluation> {
        let latency_ms = self.profile.estimate_latency(arch)?;
        let accuracy = self.oracle.evaluate(arch)?;
        Ok(Evaluation {
            score: self.config.combine(accuracy, latency_ms),
            latency_ms,
            accuracy,
        })
    }
}

/// Memo of evaluations keyed by the canonical architecture, counting how
/// many times the objective was actually invoked.
#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    memo: Option<BTreeMap<Architecture, Evaluation>>,
    evaluations: usize,
}

impl ScoreCache {
    pub fn new(memoize: bool) -> Self {
        Self {
            memo: memoize.then(BTreeMap::new),
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Scores `archs` in order. Uncached architectures are evaluated once
    /// each through `exec`.
    pub fn score_all<E: Executor>(
        &mut self,
        objective: &Objective<'_>,
        archs: &[Architecture],
        exec: &E,
    ) -> Result<Vec<Evaluation>> {
        let Some(memo) = self.memo.as_mut() else {
            self.evaluations += archs.len();
            return exec
                .map(archs, |a| objective.score(a))
                .into_iter()
                .collect();
        };
        let pending: Vec<Architecture> = archs
            .iter()
            .filter(|a| !memo.contains_key(*a))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let fresh = exec.map(&pending, |a| objective.score(a));
        self.evaluations += pending.len();
        for (arch, eval) in pending.into_iter().zip(fresh) {
            memo.insert(arch, eval?);
        }
        Ok(archs.iter().map(|a| memo[a]).collect())
    }
}
