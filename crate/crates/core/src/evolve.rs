//! Evolutionary search for the highest-scoring architecture.
//!
//! Generation 0 is drawn uniformly from the space. Every later generation
//! keeps the `elitism` best individuals unchanged and fills the remaining
//! slots with children of the top `n_parents`: a child is a uniform
//! gene-wise crossover of two parents with probability `crossover_prob`
//! (otherwise a clone of one parent), followed by mutation that redraws
//! operators and channel factors as set by [`MutationScope`]. Fixed layers
//! keep their operator, so every child stays inside the (possibly shrunk)
//! space.
//!
//! Each child draws from a stream derived from `(seed, generation, slot)`,
//! which makes the outcome independent of how scoring is scheduled.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::objective::{Evaluation, Objective, ScoreCache};
use crate::rng::{child_seed, stream};
use crate::space::{Architecture, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MutationScope {
    /// Each gene mutates with `mutation_prob`; a mutating gene redraws either
    /// its operator or its channel factor, chosen evenly. Fixed layers only
    /// redraw the channel factor.
    PerGene,
    /// The operator slot and the channel slot of every layer are each
    /// redrawn independently with `mutation_prob`.
    PerSlot,
    /// Each gene mutates with `mutation_prob` and redraws both slots.
    WholeGene,
}

/// Equal-width latency bins spanning `[lo_ratio, hi_ratio] * target`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo_ratio: f64,
    pub hi_ratio: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bins: 20,
            lo_ratio: 0.5,
            hi_ratio: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EaConfig {
    pub generations: usize,
    pub population_size: usize,
    pub n_parents: usize,
    /// Probability that a child is produced by crossover.
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_scope: MutationScope,
    pub elitism: usize,
    pub memoize: bool,
    pub histogram: HistogramSpec,
    pub seed: u64,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            generations: 20,
            population_size: 50,
            n_parents: 20,
            crossover_prob: 0.25,
            mutation_prob: 0.25,
            mutation_scope: MutationScope::PerGene,
            elitism: 2,
            memoize: true,
            histogram: HistogramSpec::default(),
            seed: 0,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.population_size == 0 {
            return bad("population_size must be >= 1");
        }
        if self.n_parents == 0 || self.n_parents > self.population_size {
            return bad("n_parents must be in 1..=population_size");
        }
        if self.elitism > self.population_size {
            return bad("elitism cannot exceed population_size");
        }
        for p in [self.crossover_prob, self.mutation_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        let h = &self.histogram;
        if h.bins == 0 || h.lo_ratio.is_nan() || h.hi_ratio.is_nan() || h.lo_ratio >= h.hi_ratio {
            return bad("histogram needs >= 1 bin and lo_ratio < hi_ratio");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Individual {
    pub arch: Architecture,
    pub score: f64,
    pub latency_ms: f64,
    pub accuracy: f64,
}

impl Individual {
    fn new(arch: Architecture, e: Evaluation) -> Self {
        Self {
            arch,
            score: e.score,
            latency_ms: e.latency_ms,
            accuracy: e.accuracy,
        }
    }

    /// Higher score first; equal scores fall back to the smaller architecture.
    fn rank(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.arch.cmp(&other.arch))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Member {
    pub latency_ms: f64,
    pub accuracy: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_score: f64,
    pub mean_score: f64,
    pub histogram: Vec<u32>,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchReport {
    pub seed: u64,
    pub target_latency_ms: f64,
    pub config: EaConfig,
    pub best: Individual,
    pub generations: Vec<GenerationRecord>,
    pub final_population: Vec<Individual>,
    pub evaluations: usize,
}

impl SearchReport {
    /// `(lo, hi)` latency range of the histograms.
    pub fn histogram_range(&self) -> (f64, f64) {
        let h = &self.config.histogram;
        (
            h.lo_ratio * self.target_latency_ms,
            h.hi_ratio * self.target_latency_ms,
        )
    }
}

/// Equal-width binning of `latencies` over `[lo, hi)`; values outside the
/// range are counted in the first or last bin.
pub fn latency_histogram<I>(latencies: I, bins: usize, range: (f64, f64)) -> Result<Vec<u32>>
where
    I: IntoIterator<Item = f64>,
{
    let (lo, hi) = range;
    if bins == 0 || lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "histogram needs bins >= 1 and lo < hi, got {bins} bins over ({lo}, {hi})"
        )));
    }
    let mut counts = alloc::vec![0u32; bins];
    let width = (hi - lo) / bins as f64;
    for x in latencies {
        let idx = libm::floor((x - lo) / width);
        let idx = if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(counts)
}

fn record(generation: usize, pop: &[Individual], target: f64, h: &HistogramSpec) -> Result<GenerationRecord> {
    let best_score = pop
        .iter()
        .map(|i| i.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean_score = pop.iter().map(|i| i.score).sum::<f64>() / pop.len() as f64;
    let histogram = latency_histogram(
        pop.iter().map(|i| i.latency_ms),
        h.bins,
        (h.lo_ratio * target, h.hi_ratio * target),
    )?;
    Ok(GenerationRecord {
        generation,
        best_score,
        mean_score,
        histogram,
        members: pop
            .iter()
            .map(|i| Member {
                latency_ms: i.latency_ms,
                accuracy: i.accuracy,
                score: i.score,
            })
            .collect(),
    })
}

fn breed<R: Rng>(space: &SearchSpace, parents: &[Individual], ea: &EaConfig, rng: &mut R) -> Architecture {
    let a = &parents[rng.random_range(0..parents.len())].arch;
    let mut child = if rng.random::<f64>() < ea.crossover_prob {
        let b = &parents[rng.random_range(0..parents.len())].arch;
        let genes = a
            .genes
            .iter()
            .zip(&b.genes)
            .map(|(&ga, &gb)| if rng.random::<bool>() { ga } else { gb })
            .collect();
        Architecture::new(genes)
    } else {
        a.clone()
    };
    for (l, gene) in child.genes.iter_mut().enumerate() {
        match ea.mutation_scope {
            MutationScope::PerGene => {
                if rng.random::<f64>() < ea.mutation_prob {
                    if space.is_fixed(l) || rng.random::<bool>() {
                        gene.factor = space.resample_factor(rng);
                    } else {
                        gene.op = space.resample_operator(l, rng);
                    }
                }
            }
            MutationScope::PerSlot => {
                if rng.random::<f64>() < ea.mutation_prob {
                    gene.op = space.resample_operator(l, rng);
                }
                if rng.random::<f64>() < ea.mutation_prob {
                    gene.factor = space.resample_factor(rng);
                }
            }
            MutationScope::WholeGene => {
                if rng.random::<f64>() < ea.mutation_prob {
                    *gene = space.resample_gene(l, rng);
                }
            }
        }
    }
    child
}

pub fn evolve<E: Executor>(
    space: &SearchSpace,
    objective: &Objective<'_>,
    ea: &EaConfig,
    exec: &E,
) -> Result<SearchReport> {
    ea.validate()?;
    let target = objective.config.target_latency_ms;
    let mut cache = ScoreCache::new(ea.memoize);
    let score = |archs: Vec<Architecture>, cache: &mut ScoreCache| -> Result<Vec<Individual>> {
        let evals = cache.score_all(objective, &archs, exec)?;
        Ok(archs.into_iter().zip(evals).map(|(a, e)| Individual::new(a, e)).collect())
    };

    let initial = (0..ea.population_size)
        .map(|slot| space.sample(&mut stream(child_seed(ea.seed, &[0, slot as u64]))))
        .collect();
    let mut pop = score(initial, &mut cache)?;
    let mut best = pop.iter().min_by(|a, b| a.rank(b)).cloned().expect("non-empty");
    let mut generations = Vec::with_capacity(ea.generations + 1);
    generations.push(record(0, &pop, target, &ea.histogram)?);

    for g in 1..=ea.generations {
        pop.sort_by(Individual::rank);
        let parents = &pop[..ea.n_parents];
        let mut next: Vec<Architecture> = pop[..ea.elitism].iter().map(|i| i.arch.clone()).collect();
        for slot in ea.elitism..ea.population_size {
            let mut rng = stream(child_seed(ea.seed, &[g as u64, slot as u64]));
            next.push(breed(space, parents, ea, &mut rng));
        }
        pop = score(next, &mut cache)?;
        if let Some(top) = pop.iter().min_by(|a, b| a.rank(b)) {
            if top.rank(&best) == Ordering::Less {
                best = top.clone();
            }
        }
        generations.push(record(g, &pop, target, &ea.histogram)?);
    }

    Ok(SearchReport {
        seed: ea.seed,
        target_latency_ms: target,
        config: ea.clone(),
        best,
        generations,
        final_population: pop,
        evaluations: cache.evaluations(),
    })
}

/// Scores every architecture of `space` and returns the best; ties go to the
/// lexicographically smallest gene vector. Refuses spaces larger than `cap`.
pub fn exhaustive_argmax(space: &SearchSpace, objective: &Objective<'_>, cap: u64) -> Result<Individual> {
    let size = space.size();
    if size > BigUint::from(cap) {
        return Err(Error::SpaceTooLarge {
            size: format!("{size}"),
            cap: format!("{cap}"),
        });
    }
    let mut best: Option<Individual> = None;
    for arch in space.architectures() {
        let e = objective.score(&arch)?;
        // enumeration is ascending, so strict improvement keeps the smallest tie
        if best.as_ref().is_none_or(|b| e.score > b.score) {
            best = Some(Individual::new(arch, e));
        }
    }
    Ok(best.expect("spaces are non-empty"))
}
