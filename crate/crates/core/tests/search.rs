use std::sync::Mutex;

use hwnas_core::rng::child_seed;
use hwnas_core::{
    evolve, exhaustive_argmax, run_shrink, ConstantOracle, DeviceProfile, DeviceTemplate,
    EaConfig, Executor, GeneTable, Objective, ObjectiveConfig, OperatorId, SearchSpace,
    Sequential, ShrinkPlan, SurrogateOracle, SurrogateParams,
};

/// Runs items back to front on scoped threads, then restores input order.
struct Scrambled;

impl Executor for Scrambled {
    fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for (i, item) in items.iter().enumerate().rev() {
                let (f, slots) = (&f, &slots);
                s.spawn(move || *slots[i].lock().unwrap() = Some(f(item)));
            }
        });
        slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
    }
}

fn edge_setup(seed: u64) -> (SearchSpace, DeviceProfile, SurrogateOracle) {
    let space = SearchSpace::shufflenet_like();
    let dev = DeviceTemplate::Edge.build(&space, seed);
    let mut profile = DeviceProfile::new("edge", 16, dev.export_true_table());
    profile.bias_ms = dev.overhead_ms(space.depth());
    let oracle = SurrogateOracle::generate(&space, child_seed(seed, &[9]), &SurrogateParams::default());
    (space, profile, oracle)
}

#[test]
fn best_score_never_drops() {
    for seed in 0..5 {
        let (space, profile, oracle) = edge_setup(seed);
        let obj = Objective::new(ObjectiveConfig::default(), &profile, &oracle).unwrap();
        let ea = EaConfig { seed, generations: 10, ..EaConfig::default() };
        let rep = evolve(&space, &obj, &ea, &Sequential).unwrap();
        for w in rep.generations.windows(2) {
            assert!(w[1].best_score >= w[0].best_score, "seed {seed}");
        }
        assert_eq!(rep.best.score, rep.generations.last().unwrap().best_score);
    }
}

#[test]
fn search_in_a_shrunk_space_stays_feasible() {
    let (space, profile, oracle) = edge_setup(3);
    let obj = Objective::new(ObjectiveConfig::default(), &profile, &oracle).unwrap();
    let plan = ShrinkPlan { n_samples: 10, ..ShrinkPlan::default() };
    let (shrunk, _) = run_shrink(&space, &plan, &obj, 3, &Sequential).unwrap();
    let rep = evolve(&shrunk, &obj, &EaConfig { seed: 3, ..EaConfig::default() }, &Sequential).unwrap();
    assert!(rep.final_population.iter().all(|i| shrunk.contains(&i.arch)));
    assert!(shrunk.contains(&rep.best.arch));
}

#[test]
fn worker_schedule_does_not_change_results() {
    let (space, profile, oracle) = edge_setup(11);
    let obj = Objective::new(ObjectiveConfig::default(), &profile, &oracle).unwrap();
    let plan = ShrinkPlan { n_samples: 8, ..ShrinkPlan::default() };
    let a = run_shrink(&space, &plan, &obj, 5, &Sequential).unwrap();
    let b = run_shrink(&space, &plan, &obj, 5, &Scrambled).unwrap();
    assert_eq!(a, b);
    let ea = EaConfig { seed: 5, generations: 5, ..EaConfig::default() };
    let a = evolve(&a.0, &obj, &ea, &Sequential).unwrap();
    let b = evolve(&b.0, &obj, &ea, &Scrambled).unwrap();
    assert_eq!(a, b);
}

#[test]
fn default_plan_fixes_exactly_its_layers() {
    let (space, profile, oracle) = edge_setup(2);
    let obj = Objective::new(ObjectiveConfig::default(), &profile, &oracle).unwrap();
    let plan = ShrinkPlan { n_samples: 5, ..ShrinkPlan::default() };
    let (shrunk, trace) = run_shrink(&space, &plan, &obj, 2, &Sequential).unwrap();
    let fixed: Vec<usize> = (0..20).filter(|&l| shrunk.is_fixed(l)).collect();
    assert_eq!(fixed, (12..20).collect::<Vec<_>>());
    assert_eq!(shrunk.channel_factors(), space.channel_factors());
    assert_eq!(trace.total_evaluated, 40);
}

/// One operator per layer dominates, so the optimum is unambiguous.
#[test]
fn evolve_agrees_with_enumeration_on_a_dominant_gene_landscape() {
    let space = SearchSpace::uniform(4, &["a", "b", "c"], 8, &[0.5, 1.0]).unwrap();
    let profile = DeviceProfile::new("flat", 1, GeneTable::tabulate(&space, |_, _, cf| cf.value()));
    for seed in 0..10u64 {
        let best_op = |l: usize| ((seed as usize) + l) % 3;
        let weights = GeneTable::tabulate(&space, |l, op, cf| {
            let base = if op.index() == best_op(l) { 1.0 } else { 0.0 };
            base + 0.1 * cf.value()
        });
        let oracle = SurrogateOracle {
            seed,
            intercept: -2.0,
            unary_weights: weights,
            pairwise_weights: Vec::new(),
        };
        let obj = Objective::new(ObjectiveConfig::new(3.0, -0.1).unwrap(), &profile, &oracle).unwrap();
        let exact = exhaustive_argmax(&space, &obj, 1_000_000).unwrap();
        let found = evolve(&space, &obj, &EaConfig { seed, ..EaConfig::default() }, &Sequential).unwrap();
        assert_eq!(found.best.arch, exact.arch, "seed {seed}");
        for (l, g) in exact.arch.genes.iter().enumerate() {
            assert_eq!(g.op, OperatorId(best_op(l) as u16));
        }
    }
}

#[test]
fn constant_accuracy_optimum_is_nearest_to_target() {
    let space = SearchSpace::uniform(3, &["a", "b"], 8, &[0.2, 0.4, 0.5, 0.6, 0.8, 1.0]).unwrap();
    assert_eq!(space.size_u64(), Some(1728));
    let profile = DeviceProfile::new("p", 1, GeneTable::tabulate(&space, |l, op, cf| {
        (l as f64 + 1.0) * cf.value() + 0.3 * op.index() as f64
    }));
    let oracle = ConstantOracle(0.5);
    let obj = Objective::new(ObjectiveConfig::new(2.2, -0.1).unwrap(), &profile, &oracle).unwrap();
    let best = exhaustive_argmax(&space, &obj, 1_000_000).unwrap();
    let nearest = space
        .architectures()
        .map(|a| (profile.estimate_latency(&a).unwrap() - 2.2).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(((best.latency_ms - 2.2).abs() - nearest).abs() < 1e-12);
}
