use hetpart::cost_model::lambert_w;
use hetpart::partition::{
    dp_optimal, exact_analytic, exact_analytic_real, greedy_round, multiplicative_closed_form, proportional,
    proportional_real,
};
use hetpart::simulator::{simulate, SimParams};
use hetpart::{run_batches, ClusterSpec, CostFunction, LearnedCostModel, Partition, Scheme, Speed, UpdateStrategy};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = CostFunction<f64>> {
    prop_oneof![
        Just(CostFunction::linear()),
        Just(CostFunction::nlogn()),
        (1.1f64..3.0).prop_map(|e| CostFunction::power(e).unwrap()),
        (0.5f64..2.0, 0.0f64..2.0).prop_map(|(a, b)| CostFunction::polylog(a, b).unwrap()),
    ]
}

fn speeds(max_p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.25f64..8.0, 1..=max_p)
}

fn brute_force(spec: &ClusterSpec<f64>, n: u64) -> f64 {
    fn go(spec: &ClusterSpec<f64>, node: usize, left: u64, acc: f64) -> f64 {
        if node + 1 == spec.len() {
            return acc.max(spec.node_time_count(node, left));
        }
        (0..=left)
            .map(|j| go(spec, node + 1, left - j, acc.max(spec.node_time_count(node, j))))
            .fold(f64::INFINITY, f64::min)
    }
    go(spec, 0, n, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn inverse_undoes_evaluate(f in family(), log_n in (2f64).ln()..(1e9f64).ln()) {
        let n = log_n.exp();
        let back = f.inverse(f.evaluate(n));
        prop_assert!((back - n).abs() <= 1e-6 * n, "{f:?}: {n} -> {back}");
    }

    #[test]
    fn evaluate_strictly_increasing(f in family(), a in 2f64..1e8, d in 1e-3f64..1e6) {
        prop_assert!(f.evaluate(a + d) > f.evaluate(a));
    }

    #[test]
    fn power_is_multiplicative(e in 1.0f64..3.0, scale in 0.5f64..4.0, a in 1f64..1e3, b in 1f64..1e3) {
        let f = CostFunction::power(e).unwrap().with_scale(scale).unwrap();
        let lhs = f.evaluate(a * b);
        let rhs = f.evaluate(a) * f.evaluate(b) / scale;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn lambert_w_residual(log_x in -30f64..(1e300f64).ln()) {
        let x = log_x.exp();
        let w = lambert_w(x).unwrap();
        prop_assert!((w * w.exp() - x).abs() <= 1e-9 * x.max(1.0) || (w + w.ln() - x.ln()).abs() <= 1e-12 * x.ln().abs().max(1.0));
    }

    #[test]
    fn every_scheme_conserves_items(k in speeds(8), f in family(), n in 0u64..2_000_000) {
        let spec = ClusterSpec::uniform(&k, f).unwrap();
        for scheme in Scheme::ALL {
            if scheme.validate(&spec).is_err() {
                continue;
            }
            let granularity = if scheme == Scheme::Dp { (n / 2000).max(1) } else { 1 };
            match scheme.partition(&spec, n, granularity) {
                Ok(p) => prop_assert_eq!(p.total(), n, "{}", scheme),
                Err(e) => prop_assert!(scheme == Scheme::Asymptotic, "{scheme}: {e}"),
            }
        }
    }

    #[test]
    fn unrelated_costs_conserve_items(
        pairs in prop::collection::vec((0.25f64..8.0, family()), 1..6),
        n in 0u64..100_000,
    ) {
        let (k, costs): (Vec<f64>, Vec<CostFunction<f64>>) = pairs.into_iter().unzip();
        let spec = ClusterSpec::unrelated(&k, costs).unwrap();
        prop_assert_eq!(proportional(&spec, n).unwrap().total(), n);
        prop_assert_eq!(dp_optimal(&spec, n.min(3000), 1).unwrap().total(), n.min(3000));
    }

    #[test]
    fn exact_real_split_has_equal_times(k in speeds(16), n in 1_000u64..1_000_000_000) {
        let spec = ClusterSpec::uniform(&k, CostFunction::nlogn()).unwrap();
        let real = exact_analytic_real(&spec, n).unwrap();
        let t = real.deadline.unwrap();
        for (i, &x) in real.sizes.iter().enumerate() {
            prop_assert!((spec.node_time(i, x) - t).abs() <= 1e-6 * t);
        }
    }

    #[test]
    fn linear_schemes_agree(k in speeds(6), n in 0u64..400) {
        let spec = ClusterSpec::uniform(&k, CostFunction::linear()).unwrap();
        let reference = proportional(&spec, n).unwrap();
        for other in [
            exact_analytic(&spec, n).unwrap(),
            multiplicative_closed_form(&spec, n).unwrap(),
            dp_optimal(&spec, n, 1).unwrap(),
        ] {
            for (a, b) in other.sizes().iter().zip(reference.sizes()) {
                prop_assert!(a.abs_diff(*b) <= 1, "{:?} vs {:?}", other.sizes(), reference.sizes());
            }
        }
    }

    #[test]
    fn exact_dominates_proportional_for_nlogn(k in speeds(8), n in 1_000u64..100_000_000) {
        prop_assume!(k.iter().any(|&x| x != k[0]));
        let spec = ClusterSpec::uniform(&k, CostFunction::nlogn()).unwrap();
        let makespan = |sizes: &[f64]| {
            sizes.iter().enumerate().map(|(i, &x)| spec.node_time(i, x)).fold(0.0, f64::max)
        };
        let exact = makespan(&exact_analytic_real(&spec, n).unwrap().sizes);
        let prop = makespan(&proportional_real(&spec, n).sizes);
        prop_assert!(exact <= prop * (1.0 + 1e-12));
    }

    #[test]
    fn simulated_makespan_grows_with_n(k in speeds(6), n in 0u64..1_000_000, dn in 1u64..10_000) {
        let spec = ClusterSpec::uniform(&k, CostFunction::nlogn()).unwrap();
        let params = SimParams::default();
        for scheme in [Scheme::Proportional, Scheme::Exact] {
            let a = simulate(&spec, &scheme.partition(&spec, n, 1).unwrap(), &params).unwrap();
            let b = simulate(&spec, &scheme.partition(&spec, n + dn, 1).unwrap(), &params).unwrap();
            prop_assert!(b.makespan() >= a.makespan(), "{scheme}: {} -> {}", a.makespan(), b.makespan());
        }
    }

    #[test]
    fn linear_proportional_simulation_is_balanced(k in speeds(6), m in 1u64..1000) {
        // N a multiple of every k_i * 4 keeps the proportional split exact
        let k: Vec<f64> = k.iter().map(|x| (x * 4.0).round().max(1.0)).collect();
        let n = m * k.iter().map(|&x| x as u64).sum::<u64>();
        let spec = ClusterSpec::uniform(&k, CostFunction::linear()).unwrap();
        let t = simulate(&spec, &proportional(&spec, n).unwrap(), &SimParams::default()).unwrap();
        let totals = t.totals();
        for x in &totals {
            prop_assert!((x - totals[0]).abs() <= 1e-9 * totals[0]);
        }
    }

    #[test]
    fn learned_model_stays_monotone(
        obs in prop::collection::vec((1u64..10_000, 1e-3f64..1e4, 0.5f64..4.0), 1..60),
        strategy in prop_oneof![
            Just(UpdateStrategy::Replace),
            Just(UpdateStrategy::OccurrenceWeightedMean),
            Just(UpdateStrategy::Max),
        ],
        k in speeds(5),
        n in 0u64..100_000,
    ) {
        let mut model = LearnedCostModel::new(strategy, 1.0);
        for (size, duration, speed) in obs {
            model.observe(size, duration, Speed::new(speed).unwrap()).unwrap();
            let pts = model.known_points();
            prop_assert!(pts.windows(2).all(|w| w[0].size < w[1].size && w[0].cost <= w[1].cost));
        }
        prop_assert_eq!(model.plan_batch(&k, n).unwrap().total(), n);
    }

    #[test]
    fn replace_model_fixed_point(sizes in prop::collection::btree_set(1u64..5_000, 2..20), probe in prop::collection::vec(1u64..5_000, 1..20)) {
        let truth = CostFunction::power(1.7).unwrap();
        let mut model = LearnedCostModel::new(UpdateStrategy::Replace, 1.0);
        for &s in &sizes {
            model.observe(s, truth.evaluate_count(s), Speed::new(1.0).unwrap()).unwrap();
        }
        let before = model.clone();
        for s in probe.into_iter().filter(|s| sizes.contains(s)) {
            let c = model.interpolate(s as f64);
            model.observe(s, c, Speed::new(1.0).unwrap()).unwrap();
        }
        prop_assert_eq!(model, before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_matches_brute_force(
        pairs in prop::collection::vec((0.25f64..4.0, family()), 1..=3),
        n in 0u64..=40,
    ) {
        let (k, costs): (Vec<f64>, Vec<CostFunction<f64>>) = pairs.into_iter().unzip();
        let spec = ClusterSpec::unrelated(&k, costs).unwrap();
        prop_assert_eq!(dp_optimal(&spec, n, 1).unwrap().makespan(), brute_force(&spec, n));
    }

    #[test]
    fn greedy_rounding_is_optimal(
        pairs in prop::collection::vec((0.25f64..4.0, family(), 0.01f64..1.0), 1..=5),
        n in 0u64..=50,
    ) {
        let k: Vec<f64> = pairs.iter().map(|t| t.0).collect();
        let costs: Vec<CostFunction<f64>> = pairs.iter().map(|t| t.1.clone()).collect();
        let wsum: f64 = pairs.iter().map(|t| t.2).sum();
        let real: Vec<f64> = pairs.iter().map(|t| t.2 / wsum * n as f64 * (1.0 - 1e-12)).collect();
        let spec = ClusterSpec::unrelated(&k, costs).unwrap();
        let greedy = greedy_round(&real, &spec, n).unwrap();
        let base: Vec<u64> = real.iter().map(|x| x.floor() as u64).collect();
        let leftover = n - base.iter().sum::<u64>();
        // best over every distribution of the leftover
        let mut best = f64::INFINITY;
        let p = base.len();
        let mut delta = vec![0u64; p];
        fn rec(i: usize, left: u64, delta: &mut Vec<u64>, base: &[u64], spec: &ClusterSpec<f64>, best: &mut f64) {
            if i + 1 == delta.len() {
                delta[i] = left;
                let sizes: Vec<u64> = base.iter().zip(delta.iter()).map(|(b, d)| b + d).collect();
                *best = best.min(Partition::from_sizes(spec, sizes).unwrap().makespan());
                return;
            }
            for d in 0..=left {
                delta[i] = d;
                rec(i + 1, left - d, delta, base, spec, best);
            }
        }
        rec(0, leftover, &mut delta, &base, &spec, &mut best);
        prop_assert_eq!(greedy.makespan(), best);
    }
}

#[test]
fn convergence_to_speed_shares() {
    for k in [[1.0, 2.0], [1.0, 1.5], [3.0, 1.0]] {
        let spec = ClusterSpec::uniform(&k, CostFunction::nlogn()).unwrap();
        let total = spec.total_speed();
        let gaps: Vec<f64> = [1e3f64, 1e4, 1e5, 1e6]
            .iter()
            .map(|&n| {
                exact_analytic_real(&spec, n as u64)
                    .unwrap()
                    .sizes
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (x / n - k[i] / total).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{k:?}: {gaps:?}");
    }
}

#[test]
fn learning_improves_balance_over_twenty_batches() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut violations = 0;
    for _ in 0..50 {
        let p = rng.gen_range(2..=6);
        let k: Vec<f64> = (0..p).map(|_| rng.gen_range(1.0..4.0)).collect();
        let exponent = rng.gen_range(1.3..2.5);
        let truth = vec![CostFunction::power(exponent).unwrap(); p];
        let (_, out) = run_batches(LearnedCostModel::default(), &k, &[2000; 20], &truth).unwrap();
        if out[19].makespan > out[0].makespan {
            violations += 1;
        }
    }
    assert!(violations <= 2, "{violations} violations");
}
