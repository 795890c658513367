//! Flat text and CSV views of reports.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use hwnas_core::{Architecture, MutationScope, SearchReport, SearchSpace, ShrinkTrace};

/// `op:factor` per layer, using operator names when a space is given.
pub fn arch_string(arch: &Architecture, space: Option<&SearchSpace>) -> String {
    let mut out = String::new();
    for (l, g) in arch.genes.iter().enumerate() {
        if l > 0 {
            out.push(' ');
        }
        let name = space
            .and_then(|s| s.layers().get(l))
            .and_then(|layer| layer.operator_name(g.op));
        match name {
            Some(n) => write!(out, "{n}:{}", g.factor).unwrap(),
            None => write!(out, "{}:{}", g.op, g.factor).unwrap(),
        }
    }
    out
}

pub fn shrink_table(trace: &ShrinkTrace, space: &SearchSpace) -> String {
    let mut out = String::new();
    writeln!(out, "stage  layer  operator               mean      stddev    chosen").unwrap();
    for r in &trace.records {
        for c in &r.candidates {
            let name = space.layers()[r.layer]
                .operator_name(c.operator)
                .unwrap_or("?");
            let mark = if c.operator == r.chosen {
                "*"
            } else if r.tied.contains(&c.operator) {
                "="
            } else {
                ""
            };
            writeln!(
                out,
                "{:>5}  {:>5}  {:<20} {:>9.6} {:>9.6}    {mark}",
                r.stage, r.layer, name, c.estimate.mean_score, c.estimate.score_stddev
            )
            .unwrap();
        }
    }
    let stages = trace.records.iter().map(|r| r.stage + 1).max().unwrap_or(0);
    writeln!(out).unwrap();
    for s in 0..stages {
        if let Some((before, after)) = trace.stage_sizes(s) {
            writeln!(
                out,
                "stage {s}: {} estimates, size {before} -> {after}",
                trace.evaluated_in_stage(s)
            )
            .unwrap();
        }
    }
    writeln!(out, "total estimates: {}", trace.total_evaluated).unwrap();
    out
}

fn scope_name(s: MutationScope) -> &'static str {
    match s {
        MutationScope::PerGene => "per gene, one slot",
        MutationScope::PerSlot => "per slot",
        MutationScope::WholeGene => "per gene, whole gene",
    }
}

fn in_band(latency_ms: f64, target: f64) -> bool {
    (latency_ms / target - 1.0).abs() <= 0.1
}

pub fn summary(report: &SearchReport, space: Option<&SearchSpace>) -> String {
    let t = report.target_latency_ms;
    let ea = &report.config;
    let mut out = String::new();
    writeln!(out, "search seed: {}", report.seed).unwrap();
    writeln!(out, "target latency: {t} ms").unwrap();
    writeln!(
        out,
        "generations: {}  population: {}  parents: {}  elitism: {}",
        ea.generations, ea.population_size, ea.n_parents, ea.elitism
    )
    .unwrap();
    writeln!(
        out,
        "crossover: per child, p = {}  mutation: {}, p = {}",
        ea.crossover_prob,
        scope_name(ea.mutation_scope),
        ea.mutation_prob
    )
    .unwrap();
    writeln!(out, "evaluations: {}", report.evaluations).unwrap();
    let b = &report.best;
    writeln!(out).unwrap();
    writeln!(out, "best score: {:.6}", b.score).unwrap();
    writeln!(out, "best latency: {:.3} ms ({:+.2}% of target)", b.latency_ms, (b.latency_ms / t - 1.0) * 100.0).unwrap();
    writeln!(out, "best accuracy: {:.6}", b.accuracy).unwrap();
    writeln!(out, "best architecture: {}", arch_string(&b.arch, space)).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "gen  best       mean       within 10% of target").unwrap();
    for g in &report.generations {
        let band = g.members.iter().filter(|m| in_band(m.latency_ms, t)).count();
        writeln!(
            out,
            "{:>3}  {:.6}   {:.6}   {band}/{}",
            g.generation,
            g.best_score,
            g.mean_score,
            g.members.len()
        )
        .unwrap();
    }
    out
}

pub fn write_population_csv(path: &Path, report: &SearchReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["generation", "individual", "latency_ms", "accuracy", "score"])?;
    for g in &report.generations {
        for (i, m) in g.members.iter().enumerate() {
            w.write_record([
                g.generation.to_string(),
                i.to_string(),
                m.latency_ms.to_string(),
                m.accuracy.to_string(),
                m.score.to_string(),
            ])?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, report: &SearchReport) -> Result<()> {
    let (lo, hi) = report.histogram_range();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["generation", "bin", "lo_ms", "hi_ms", "count"])?;
    for g in &report.generations {
        let width = (hi - lo) / g.histogram.len() as f64;
        for (i, &count) in g.histogram.iter().enumerate() {
            w.write_record([
                g.generation.to_string(),
                i.to_string(),
                (lo + width * i as f64).to_string(),
                (lo + width * (i + 1) as f64).to_string(),
                count.to_string(),
            ])?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
