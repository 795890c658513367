//! Subspace quality and progressive space shrinking.
//!
//! The quality of a subspace is the mean objective score of `N` architectures
//! drawn uniformly from it. Shrinking visits the layers of a [`ShrinkPlan`]
//! one at a time; for each it restricts the current space to every operator
//! in turn, estimates the quality of each restriction and keeps the best.
//! A stage of `k` layers with `K` operators each therefore costs `K * k`
//! estimates instead of the `K^k` a joint search would need.

use alloc::vec::Vec;
use alloc::{format, vec};

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::objective::Objective;
use crate::rng::{child_seed, stream};
use crate::space::{OperatorId, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QualityEstimate {
    pub subspace: SearchSpace,
    pub n_samples: usize,
    pub mean_score: f64,
    /// Sample standard deviation of the scores (zero when `n_samples == 1`).
    pub score_stddev: f64,
    pub seed: u64,
}

/// Mean score of `n` uniform samples from `subspace`.
pub fn estimate_quality(
    subspace: &SearchSpace,
    objective: &Objective<'_>,
    n: usize,
    seed: u64,
) -> Result<QualityEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("quality needs at least one sample".into()));
    }
    let mut rng = stream(seed);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let arch = subspace.sample(&mut rng);
        scores.push(objective.score(&arch)?.score);
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let score_stddev = if n > 1 {
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        libm::sqrt(ss / (n - 1) as f64)
    } else {
        0.0
    };
    Ok(QualityEstimate {
        subspace: subspace.clone(),
        n_samples: n,
        mean_score: mean,
        score_stddev,
        seed,
    })
}

/// Layers to fix, stage by stage, in processing order (0-based indices).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShrinkPlan {
    pub stages: Vec<Vec<usize>>,
    pub n_samples: usize,
}

impl Default for ShrinkPlan {
    /// Two stages of four layers walking back from layer 20 of a 20-layer
    /// space, with 100 samples per estimate.
    fn default() -> Self {
        Self::trailing(20, 2, 4, 100)
    }
}

impl ShrinkPlan {
    /// `stages` stages of `per_stage` layers, starting from the last layer of
    /// a `depth`-layer space and moving towards the input.
    pub fn trailing(depth: usize, stages: usize, per_stage: usize, n_samples: usize) -> Self {
        let mut next = depth;
        let stages = (0..stages)
            .map(|_| {
                (0..per_stage)
                    .filter_map(|_| {
                        next = next.checked_sub(1)?;
                        Some(next)
                    })
                    .collect()
            })
            .collect();
        Self { stages, n_samples }
    }

    pub fn layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.stages.iter().flatten().copied()
    }

    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        let mut seen = vec![false; space.depth()];
        for layer in self.layers() {
            space.layer(layer)?;
            if seen[layer] {
                return Err(Error::InvalidArgument(format!(
                    "layer {layer} appears twice in the shrink plan"
                )));
            }
            seen[layer] = true;
            if let Some(fixed) = space.layers()[layer].fixed_operator {
                return Err(Error::AlreadyFixed { layer, fixed });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub operator: OperatorId,
    pub estimate: QualityEstimate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerRecord {
    pub stage: usize,
    pub layer: usize,
    pub candidates: Vec<Candidate>,
    pub chosen: OperatorId,
    /// Other operators whose quality tied with the chosen one.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub tied: Vec<OperatorId>,
    #[cfg_attr(feature = "serde", serde(with = "crate::bigstr"))]
    pub size_before: BigUint,
    #[cfg_attr(feature = "serde", serde(with = "crate::bigstr"))]
    pub size_after: BigUint,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShrinkTrace {
    pub records: Vec<LayerRecord>,
    pub total_evaluated: usize,
}

impl ShrinkTrace {
    /// Number of quality estimates made in `stage`.
    pub fn evaluated_in_stage(&self, stage: usize) -> usize {
        self.records
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.candidates.len())
            .sum()
    }

    /// Space size before the first and after the last layer of `stage`.
    pub fn stage_sizes(&self, stage: usize) -> Option<(BigUint, BigUint)> {
        let mut it = self.records.iter().filter(|r| r.stage == stage);
        let first = it.next()?;
        let last = it.next_back().unwrap_or(first);
        Some((first.size_before.clone(), last.size_after.clone()))
    }
}

/// Fixes `layer` to the operator whose restriction has the highest quality.
///
/// Each operator's estimate draws from its own stream derived from `seed`,
/// the layer and the operator id, so `exec` may run them in any order.
/// Ties go to the lowest operator id.
pub fn shrink_layer<E: Executor>(
    space: &SearchSpace,
    layer: usize,
    objective: &Objective<'_>,
    n: usize,
    seed: u64,
    exec: &E,
    stage: usize,
) -> Result<(SearchSpace, LayerRecord)> {
    let spec = space.layer(layer)?;
    if let Some(fixed) = spec.fixed_operator {
        return Err(Error::AlreadyFixed { layer, fixed });
    }
    let ops: Vec<OperatorId> = spec.choices().collect();
    let estimates = exec.map(&ops, |&op| {
        let sub = space.restrict(layer, op)?;
        estimate_quality(&sub, objective, n, child_seed(seed, &[layer as u64, u64::from(op.0)]))
    });
    let candidates = ops
        .into_iter()
        .zip(estimates)
        .map(|(operator, e)| e.map(|estimate| Candidate { operator, estimate }))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.estimate.mean_score > candidates[best].estimate.mean_score {
            best = i;
        }
    }
    let best_q = candidates[best].estimate.mean_score;
    let tied = candidates
        .iter()
        .enumerate()
        .filter(|&(i, c)| i != best && c.estimate.mean_score == best_q)
        .map(|(_, c)| c.operator)
        .collect();
    let chosen = candidates[best].operator;
    let shrunk = candidates[best].estimate.subspace.clone();
    let record = LayerRecord {
        stage,
        layer,
        chosen,
        tied,
        size_before: space.size(),
        size_after: shrunk.size(),
        candidates,
    };
    Ok((shrunk, record))
}

/// Runs every stage of `plan` in order.
pub fn run_shrink<E: Executor>(
    space: &SearchSpace,
    plan: &ShrinkPlan,
    objective: &Objective<'_>,
    seed: u64,
    exec: &E,
) -> Result<(SearchSpace, ShrinkTrace)> {
    run_shrink_with(space, plan, objective, seed, exec, |_, _| {})
}

/// [`run_shrink`] with a callback invoked after each completed stage with
/// the stage index and the space reached so far. This is where a trainable
/// accuracy oracle would be refreshed between stages.
pub fn run_shrink_with<E, F>(
    space: &SearchSpace,
    plan: &ShrinkPlan,
    objective: &Objective<'_>,
    seed: u64,
    exec: &E,
    mut after_stage: F,
) -> Result<(SearchSpace, ShrinkTrace)>
where
    E: Executor,
    F: FnMut(usize, &SearchSpace),
{
    plan.validate(space)?;
    let mut current = space.clone();
    let mut trace = ShrinkTrace::default();
    for (stage, layers) in plan.stages.iter().enumerate() {
        let stage_seed = child_seed(seed, &[stage as u64]);
        for &layer in layers {
            let (next, record) =
                shrink_layer(&current, layer, objective, plan.n_samples, stage_seed, exec, stage)?;
            trace.total_evaluated += record.candidates.len();
            trace.records.push(record);
            current = next;
        }
        after_stage(stage, &current);
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::latency::{DeviceProfile, GeneTable};
    use crate::objective::{ConstantOracle, ObjectiveConfig, SurrogateOracle};

    fn flat_profile(space: &SearchSpace) -> DeviceProfile {
        DeviceProfile::new("flat", 1, GeneTable::tabulate(space, |_, _, _| 1.0))
    }

    #[test]
    fn default_plan_matches_trailing_layers() {
        let plan = ShrinkPlan::default();
        assert_eq!(plan.stages, vec![vec![19, 18, 17, 16], vec![15, 14, 13, 12]]);
        assert_eq!(plan.n_samples, 100);
    }

    #[test]
    fn plan_validation() {
        let space = SearchSpace::uniform(4, &["a", "b"], 4, &[1.0]).unwrap();
        let dup = ShrinkPlan { stages: vec![vec![3, 2], vec![2]], n_samples: 5 };
        assert!(dup.validate(&space).is_err());
        let oob = ShrinkPlan { stages: vec![vec![4]], n_samples: 5 };
        assert!(oob.validate(&space).is_err());
        let fixed = space.restrict(1, OperatorId(0)).unwrap();
        let p = ShrinkPlan { stages: vec![vec![1]], n_samples: 5 };
        assert!(p.validate(&fixed).is_err());
        assert!(p.validate(&space).is_ok());
    }

    #[test]
    fn single_architecture_quality_is_its_score() {
        let space = SearchSpace::uniform(2, &["a"], 4, &[1.0]).unwrap();
        let profile = flat_profile(&space);
        let oracle = ConstantOracle(0.6);
        let obj = Objective::new(ObjectiveConfig::new(4.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let arch = space.architectures().next().unwrap();
        let expected = obj.score(&arch).unwrap().score;
        for n in [1, 7, 50] {
            let q = estimate_quality(&space, &obj, n, 1).unwrap();
            assert!((q.mean_score - expected).abs() < 1e-12);
            assert!(q.score_stddev < 1e-12);
        }
        assert!(estimate_quality(&space, &obj, 0, 1).is_err());
    }

    #[test]
    fn quality_is_seed_deterministic() {
        let space = SearchSpace::shufflenet_like();
        let profile = flat_profile(&space);
        let oracle = SurrogateOracle::generate(&space, 1, &Default::default());
        let obj = Objective::new(ObjectiveConfig::new(20.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let a = estimate_quality(&space, &obj, 30, 9).unwrap();
        let b = estimate_quality(&space, &obj, 30, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_operator_layer() {
        let space = SearchSpace::uniform(3, &["only"], 4, &[0.5, 1.0]).unwrap();
        let profile = flat_profile(&space);
        let oracle = ConstantOracle(0.5);
        let obj = Objective::new(ObjectiveConfig::new(3.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let (out, rec) = shrink_layer(&space, 2, &obj, 10, 0, &Sequential, 0).unwrap();
        assert_eq!(rec.candidates.len(), 1);
        assert_eq!(rec.chosen, OperatorId(0));
        assert_eq!(out.size(), space.size());
        assert!(matches!(
            shrink_layer(&out, 2, &obj, 10, 0, &Sequential, 0),
            Err(Error::AlreadyFixed { .. })
        ));
    }

    #[test]
    fn ties_choose_lowest_operator_and_are_logged() {
        let space = SearchSpace::uniform(2, &["a", "b", "c"], 4, &[1.0]).unwrap();
        let profile = flat_profile(&space);
        let oracle = ConstantOracle(0.5);
        let obj = Objective::new(ObjectiveConfig::new(2.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let (out, rec) = shrink_layer(&space, 0, &obj, 10, 3, &Sequential, 0).unwrap();
        assert_eq!(rec.chosen, OperatorId(0));
        assert_eq!(rec.tied, vec![OperatorId(1), OperatorId(2)]);
        assert_eq!(out.size() * 3u32, space.size());
    }

    #[test]
    fn empty_plan_is_identity() {
        let space = SearchSpace::uniform(2, &["a", "b"], 4, &[1.0]).unwrap();
        let profile = flat_profile(&space);
        let oracle = ConstantOracle(0.5);
        let obj = Objective::new(ObjectiveConfig::new(2.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let plan = ShrinkPlan { stages: vec![], n_samples: 10 };
        let (out, trace) = run_shrink(&space, &plan, &obj, 1, &Sequential).unwrap();
        assert_eq!(out, space);
        assert!(trace.records.is_empty());
        assert_eq!(trace.total_evaluated, 0);
    }

    #[test]
    fn stage_hook_sees_each_stage() {
        let space = SearchSpace::uniform(6, &["a", "b"], 4, &[0.5, 1.0]).unwrap();
        let profile = flat_profile(&space);
        let oracle = ConstantOracle(0.5);
        let obj = Objective::new(ObjectiveConfig::new(6.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let plan = ShrinkPlan::trailing(6, 2, 2, 5);
        let mut seen = Vec::new();
        let (out, trace) = run_shrink_with(&space, &plan, &obj, 1, &Sequential, |s, sp| {
            seen.push((s, sp.size()));
        })
        .unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[1].1, out.size());
        assert_eq!(trace.evaluated_in_stage(0), 4);
        assert_eq!(trace.total_evaluated, 8);
        let (before, after) = trace.stage_sizes(1).unwrap();
        assert_eq!(before, after * 4u32);
    }
}
