//! Structural properties of instances, mechanisms and evaluation.

use distributed_distortion::bounds::upper_bounds;
use distributed_distortion::distortion::trial_rng;
use distributed_distortion::{
    evaluate, sweep, ComposedObjective, Generator, Information, Instance, Mechanism, MetricKind,
    RandomInstances, SelectionMode,
};
use proptest::prelude::*;
use rand::Rng;

fn shipped() -> Vec<Mechanism> {
    let mut specs: Vec<String> = upper_bounds().into_iter().map(|e| e.mechanism).collect();
    specs.dedup();
    specs.iter().map(|s| s.parse().unwrap()).collect()
}

fn random_instance(metric: MetricKind, seed: u64) -> Instance {
    RandomInstances::with_metric(metric)
        .sample(&mut trial_rng(seed, 0))
        .unwrap()
}

fn metric_strategy() -> impl Strategy<Value = MetricKind> {
    prop_oneof![
        Just(MetricKind::Line),
        Just(MetricKind::Euclidean { dimension: 2 }),
        Just(MetricKind::Graph),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_metrics_satisfy_triangle_inequality(metric in metric_strategy(), seed in any::<u64>()) {
        let inst = random_instance(metric, seed);
        prop_assert!(inst.validate_triangle().is_ok());
    }

    #[test]
    fn ordinal_profile_is_deterministic(metric in metric_strategy(), seed in any::<u64>()) {
        let inst = random_instance(metric, seed);
        prop_assert_eq!(inst.ordinal_profile(), inst.ordinal_profile());
        for (i, r) in inst.ordinal_profile().rankings.iter().enumerate() {
            for w in r.windows(2) {
                prop_assert!(inst.agent_alt(i, w[0]) <= inst.agent_alt(i, w[1]));
            }
        }
    }

    #[test]
    fn line_rankings_are_single_peaked(seed in any::<u64>()) {
        let inst = random_instance(MetricKind::Line, seed);
        let profile = inst.ordinal_profile();
        let axis = profile.line_axis.clone().unwrap();
        for r in &profile.rankings {
            // preferred-so-far alternatives must form a contiguous block of the axis
            let mut lo = axis.iter().position(|&a| a == r[0]).unwrap();
            let mut hi = lo;
            for &a in &r[1..] {
                let p = axis.iter().position(|&x| x == a).unwrap();
                if p + 1 == lo {
                    lo = p;
                } else if p == hi + 1 {
                    hi = p;
                } else {
                    prop_assert!(false, "ranking {:?} has a valley on axis {:?}", r, axis);
                }
            }
        }
    }

    #[test]
    fn ratio_at_least_one_and_winner_offered(metric in metric_strategy(), seed in any::<u64>()) {
        let inst = random_instance(metric, seed);
        for mech in shipped().iter().filter(|m| inst.is_line() || !m.requires_line()) {
            for obj in ComposedObjective::canonical() {
                let report = evaluate(mech, &inst, &obj).unwrap();
                prop_assert!(report.ratio >= 1.0 - 1e-12);
                prop_assert!(report.trace.candidates.contains(&report.trace.winner));
                prop_assert_eq!(report.trace.representatives.len(), inst.num_districts());
                if mech.selection() == SelectionMode::RepresentativesOnly {
                    prop_assert!(report.trace.representatives.contains(&report.trace.winner));
                }
                prop_assert_eq!(&mech.run(&inst, &obj).unwrap(), &report.trace);
            }
        }
    }

    #[test]
    fn shipped_mechanisms_are_unanimous(seed in any::<u64>()) {
        // agents clustered tightly around one alternative per district
        let mut rng = trial_rng(seed, 1);
        let m = rng.gen_range(2..6);
        let alts: Vec<f64> = (0..m).map(|j| j as f64 + rng.gen_range(-0.2..0.2)).collect();
        let k = rng.gen_range(1..5);
        let chosen: Vec<usize> = (0..k).map(|_| rng.gen_range(0..m)).collect();
        let districts: Vec<Vec<f64>> = chosen
            .iter()
            .map(|&a| (0..rng.gen_range(1..5)).map(|_| alts[a] + rng.gen_range(-0.1..0.1)).collect())
            .collect();
        let inst = Instance::line(&districts, &alts).unwrap();
        for mech in shipped().iter().filter(|m| m.is_unanimous()) {
            for obj in ComposedObjective::canonical() {
                let trace = mech.run(&inst, &obj).unwrap();
                prop_assert_eq!(&trace.representatives, &chosen, "{}", mech);
            }
        }
    }

    #[test]
    fn ordinal_mechanisms_ignore_affine_rescaling(seed in any::<u64>(), scale in 0.1..10.0f64, shift in -5.0..5.0f64) {
        let inst = random_instance(MetricKind::Line, seed);
        let map = |x: f64| scale * x + shift;
        let groups: Vec<Vec<f64>> = inst
            .line_positions_by_district()
            .unwrap()
            .iter()
            .map(|d| d.iter().copied().map(map).collect())
            .collect();
        let alts: Vec<f64> = (0..inst.num_alternatives()).map(|j| map(inst.alternative_position(j).unwrap())).collect();
        let moved = Instance::line(&groups, &alts).unwrap();
        prop_assume!(moved.ordinal_profile() == inst.ordinal_profile());
        for mech in shipped().iter().filter(|m| m.information() == Information::Ordinal) {
            let obj = ComposedObjective::avg_max();
            prop_assert_eq!(mech.run(&inst, &obj).unwrap(), mech.run(&moved, &obj).unwrap());
        }
    }

    /// Total distance to voters on a line does not increase while moving
    /// toward its minimizer.
    #[test]
    fn sum_of_distances_is_monotone_toward_minimizer(
        voters in prop::collection::vec(-1.0..1.0f64, 1..12),
        a in -1.5..1.5f64,
        b in -1.5..1.5f64,
    ) {
        let total = |x: f64| voters.iter().map(|v| (v - x).abs()).sum::<f64>();
        let mut sorted = voters.clone();
        sorted.sort_by(f64::total_cmp);
        let argmin = sorted[(sorted.len() + 1) / 2 - 1];
        let (x, y) = if (a - argmin).abs() <= (b - argmin).abs() { (a, b) } else { (b, a) };
        let same_side = (y < x && x <= argmin) || (argmin <= x && x < y);
        prop_assume!(same_side);
        prop_assert!(total(x) <= total(y) + 1e-12);
    }

    /// Best representative for the representatives is within 2(k-1)/k of the
    /// best alternative overall.
    #[test]
    fn representatives_contain_a_near_optimal_point(metric in metric_strategy(), seed in any::<u64>(), k in 1usize..6) {
        let inst = random_instance(metric, seed);
        let mut rng = trial_rng(seed, 2);
        let reps: Vec<usize> = (0..k).map(|_| rng.gen_range(0..inst.num_alternatives())).collect();
        let total = |j: usize| reps.iter().map(|&r| inst.alt_alt(r, j)).sum::<f64>();
        let among_reps = reps.iter().map(|&j| total(j)).fold(f64::INFINITY, f64::min);
        let overall = (0..inst.num_alternatives()).map(total).fold(f64::INFINITY, f64::min);
        let factor = 2.0 * (k as f64 - 1.0) / k as f64;
        prop_assert!(among_reps <= factor * overall + 1e-9);
    }
}

#[test]
fn composition_bound_per_instance() {
    // α + β + αβ with α = β = 1 for optimal/optimal, α = 3, β = 1 for pm/median
    let cases = [
        ("compose:optimal,optimal", 3.0),
        ("compose:plurality-matching,median", 7.0),
    ];
    for (spec, bound) in cases {
        let mech: Mechanism = spec.parse().unwrap();
        for seed in 0..500 {
            let inst = random_instance(MetricKind::Line, seed);
            for obj in [ComposedObjective::avg_avg(), ComposedObjective::avg_max()] {
                assert!(
                    evaluate(&mech, &inst, &obj).unwrap().ratio <= bound + 1e-9,
                    "{spec} seed {seed}"
                );
            }
        }
    }
}

#[test]
fn sweep_witness_round_trips() {
    let mech: Mechanism = "compose:plurality-matching,plurality-matching"
        .parse()
        .unwrap();
    let obj = ComposedObjective::max_avg();
    for metric in [
        MetricKind::Line,
        MetricKind::Euclidean { dimension: 3 },
        MetricKind::Graph,
    ] {
        let gen = Generator::Random(RandomInstances::with_metric(metric));
        let result = sweep(&mech, &obj, &gen, 300, 11).unwrap();
        let back = Instance::from_json(&result.witness.to_json()).unwrap();
        assert_eq!(
            evaluate(&mech, &back, &obj).unwrap().ratio,
            result.max_ratio
        );
        // same seed, same answer
        assert_eq!(sweep(&mech, &obj, &gen, 300, 11).unwrap(), result);
    }
}
