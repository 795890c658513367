use hwnas_core::rng::stream;
use hwnas_core::{
    scaled_channels, Architecture, ChannelFactor, ConstantOracle, DeviceProfile, GeneTable,
    MeasurementRecord, Objective, ObjectiveConfig, OperatorId, SearchSpace,
};
use num_bigint::BigUint;
use proptest::prelude::*;

fn small_space() -> impl Strategy<Value = SearchSpace> {
    (
        prop::collection::vec(1usize..=3, 1..=4),
        prop::collection::btree_set(1u32..=10, 1..=3),
    )
        .prop_map(|(widths, factors)| {
            let factors: Vec<ChannelFactor> = factors
                .into_iter()
                .map(|f| ChannelFactor::new(f64::from(f) / 10.0).unwrap())
                .collect();
            let layers = widths
                .iter()
                .map(|&k| {
                    let ops: Vec<String> = (0..k).map(|i| format!("op{i}")).collect();
                    hwnas_core::LayerSpec::new(&ops, 16)
                })
                .collect();
            SearchSpace::new(layers, factors).unwrap()
        })
}

fn table_for(space: &SearchSpace, seed: u64) -> GeneTable {
    use rand::Rng;
    let mut rng = stream(seed);
    GeneTable::tabulate(space, |_, _, _| rng.random_range(1.0..5.0))
}

proptest! {
    #[test]
    fn size_equals_enumeration(space in small_space()) {
        let n = space.architectures().count();
        prop_assert_eq!(space.size(), BigUint::from(n));
        prop_assert!(space.architectures().all(|a| space.contains(&a)));
    }

    #[test]
    fn restriction_never_grows(space in small_space(), layer in 0usize..4, op in 0u16..3) {
        prop_assume!(layer < space.depth());
        prop_assume!(usize::from(op) < space.layers()[layer].num_operators());
        let r = space.restrict(layer, OperatorId(op)).unwrap();
        prop_assert!(r.size() <= space.size());
        prop_assert_eq!(r.size() * space.layers()[layer].num_choices(), space.size());
        prop_assert!(r.architectures().all(|a| space.contains(&a)));
    }

    #[test]
    fn scaled_channels_is_monotone(max in 1u32..4096, a in 1u32..=100, b in 1u32..=100) {
        let (lo, hi) = (a.min(b), a.max(b));
        let lo_c = scaled_channels(max, ChannelFactor::new(f64::from(lo) / 100.0).unwrap());
        let hi_c = scaled_channels(max, ChannelFactor::new(f64::from(hi) / 100.0).unwrap());
        prop_assert!(lo_c >= 1);
        prop_assert!(lo_c <= hi_c);
        prop_assert!(hi_c <= max);
    }

    #[test]
    fn samples_are_members(space in small_space(), seed in any::<u64>()) {
        let mut rng = stream(seed);
        for _ in 0..20 {
            prop_assert!(space.contains(&space.sample(&mut rng)));
        }
    }

    #[test]
    fn latency_is_additive(space in small_space(), seed in any::<u64>(), bias in -1.0f64..3.0) {
        let table = table_for(&space, seed);
        let mut p = DeviceProfile::new("d", 1, table.clone());
        p.bias_ms = bias;
        let arch = space.sample(&mut stream(seed ^ 1));
        let direct: f64 = arch
            .genes
            .iter()
            .enumerate()
            .map(|(l, &g)| table.get(l, g).unwrap())
            .sum();
        let est = p.estimate_latency(&arch).unwrap();
        prop_assert!((est - (direct + bias).max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn raising_an_entry_never_lowers_latency(space in small_space(), seed in any::<u64>(), bump in 0.0f64..10.0) {
        let table = table_for(&space, seed);
        let arch = space.sample(&mut stream(seed ^ 2));
        let before = DeviceProfile::new("d", 1, table.clone()).estimate_latency(&arch).unwrap();
        let mut raised = table;
        raised.insert(0, arch.genes[0], raised.get(0, arch.genes[0]).unwrap() + bump);
        let after = DeviceProfile::new("d", 1, raised).estimate_latency(&arch).unwrap();
        prop_assert!(after >= before);
    }

    #[test]
    fn calibration_centers_residuals(space in small_space(), seed in any::<u64>(), offset in -0.4f64..5.0) {
        use rand::Rng;
        let p = DeviceProfile::new("d", 1, table_for(&space, seed));
        let mut rng = stream(seed ^ 3);
        let records: Vec<MeasurementRecord> = (0..10)
            .map(|_| {
                let arch = space.sample(&mut rng);
                let m = p.uncalibrated_ms(&arch).unwrap() + offset + rng.random_range(-0.5..0.5);
                MeasurementRecord { arch, measured_ms: m.max(0.0) }
            })
            .collect();
        let cal = p.calibrate_bias(&records).unwrap();
        let scale = records.iter().map(|r| r.measured_ms.abs()).fold(1.0, f64::max);
        prop_assert!(cal.mean_residual(&records).unwrap().abs() <= 1e-9 * scale);
    }

    #[test]
    fn score_peaks_at_target(target in 1.0f64..100.0, beta in -1.0f64..-1e-3, dev in 1e-3f64..0.9) {
        let space = SearchSpace::uniform(1, &["x"], 8, &[1.0]).unwrap();
        let arch = space.architectures().next().unwrap();
        let cfg = ObjectiveConfig::new(target, beta).unwrap();
        let score_at = |lat: f64| {
            let mut p = DeviceProfile::new("d", 1, GeneTable::tabulate(&space, |_, _, _| 0.0));
            p.bias_ms = lat;
            let oracle = ConstantOracle(0.7);
            Objective::new(cfg, &p, &oracle).unwrap().score(&arch).unwrap().score
        };
        let peak = score_at(target);
        prop_assert!((peak - 0.7).abs() < 1e-12);
        prop_assert!(score_at(target * (1.0 + dev)) < peak);
        prop_assert!(score_at(target * (1.0 - dev)) < peak);
    }
}

#[test]
fn enumeration_is_lexicographic_and_distinct() {
    let space = SearchSpace::uniform(3, &["a", "b"], 8, &[0.5, 1.0]).unwrap();
    let all: Vec<Architecture> = space.architectures().collect();
    assert_eq!(all.len(), 64);
    assert!(all.windows(2).all(|w| w[0] < w[1]));
}
