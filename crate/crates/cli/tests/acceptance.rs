//! Acceptance gate: every criterion runs at its stated tolerance and sample
//! size and prints one PASS/FAIL line. The process fails if any criterion does.

use std::process::Command;
use std::time::{Duration, Instant};

use distortion_cli::check_properties;
use distributed_distortion::adversarial::{
    gen_avg_max_family, gen_cardinal_line_family, gen_max_avg_family, gen_max_max_instance,
};
use distributed_distortion::bounds::{upper_bounds, BOUND_TOLERANCE};
use distributed_distortion::distortion::trial_rng;
use distributed_distortion::objectives::cost;
use distributed_distortion::rules::{median_line_rule, optimal_rule, plurality_matching_rule};
use distributed_distortion::{
    certify_lower_bound, sweep, ComposedObjective, Generator, Information, InnerObjective,
    Instance, Mechanism, MetricKind, RandomInstances,
};
use rand::Rng;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const SAMPLES: u64 = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, || {
        format!("{what} took {took:?}, limit {limit:?}")
    })
}

fn shipped() -> Vec<Mechanism> {
    let mut specs: Vec<String> = upper_bounds().into_iter().map(|e| e.mechanism).collect();
    specs.dedup();
    specs.iter().map(|s| s.parse().unwrap()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn proof_instance_arithmetic() -> Outcome {
    let start = Instant::now();
    let tol = 1e-12;
    let costs = |fam: &distributed_distortion::LowerBoundFamily, label: &str| {
        let fi = fam.instances.iter().find(|f| f.label == label).unwrap();
        let ca = cost(&fi.instance, &fam.objective, fi.a).unwrap();
        let cb = cost(&fi.instance, &fam.objective, fi.b).unwrap();
        (ca, cb)
    };

    let (a, b) = costs(&gen_avg_max_family(5).map_err(|e| e.to_string())?, "I1");
    check(close(a, 1.25, tol) && close(b, 0.25, tol), || {
        format!("AVG∘MAX I1 costs ({a}, {b})")
    })?;

    for x in [1, 5] {
        let (a, b) = costs(&gen_max_max_instance(x).map_err(|e| e.to_string())?, "I");
        check(close(a, 1.0, tol) && close(b, 3.0, tol), || {
            format!("MAX∘MAX costs ({a}, {b})")
        })?;
    }

    let theta = (5f64.sqrt() - 1.0) / 2.0;
    let golden = 2.0 + 5f64.sqrt();
    let r1 = (1.0 + theta) / (1.0 - theta);
    let r2 = (2.0 + theta) / theta;
    check(close(r1, golden, tol) && close(r2, golden, tol), || {
        format!("θ ratios {r1}, {r2}")
    })?;

    let fam = gen_cardinal_line_family().map_err(|e| e.to_string())?;
    let (a1, b1) = costs(&fam, "I1");
    let (a3, b3) = costs(&fam, "I3");
    check(close(a1, 2.0 - SQRT2, tol) && close(b1, SQRT2, tol), || {
        format!("line I1 costs ({a1}, {b1})")
    })?;
    check(close(a3, 2.0 + SQRT2, tol) && close(b3, SQRT2, tol), || {
        format!("line I3 costs ({a3}, {b3})")
    })?;
    check(
        close(b1 / a1, 1.0 + SQRT2, tol) && close(a3 / b3, 1.0 + SQRT2, tol),
        || "line ratios".into(),
    )?;

    within(Duration::from_secs(1), start, "arithmetic")?;
    Ok("all proof costs and ratios within 1e-12".into())
}

fn upper_bound_sweeps() -> Outcome {
    let mut cells = 0;
    let mut tightest = (String::new(), f64::INFINITY);
    let metrics = [
        MetricKind::Line,
        MetricKind::Euclidean { dimension: 2 },
        MetricKind::Graph,
    ];
    for entry in upper_bounds() {
        let mech: Mechanism = entry.mechanism.parse().map_err(|e| format!("{e}"))?;
        let obj: ComposedObjective = entry.objective.parse().map_err(|e| format!("{e}"))?;
        for metric in metrics.iter().filter(|m| entry.applies_to(m)) {
            let start = Instant::now();
            let gen = Generator::Random(RandomInstances::with_metric(*metric));
            let result =
                sweep(&mech, &obj, &gen, SAMPLES as usize, 2024).map_err(|e| e.to_string())?;
            let cell = format!("{} {} on {:?}", entry.mechanism, entry.objective, metric);
            check(entry.holds(result.max_ratio), || {
                format!(
                    "{cell}: ratio {} exceeds bound {}",
                    result.max_ratio, entry.bound
                )
            })?;
            within(Duration::from_secs(60), start, &cell)?;
            let slack = entry.bound - result.max_ratio;
            if slack < tightest.1 {
                tightest = (cell, slack);
            }
            cells += 1;
        }
    }
    Ok(format!(
        "{cells} cells x {SAMPLES} instances within bound + {BOUND_TOLERANCE:e}; least slack {:.2e} ({})",
        tightest.1, tightest.0
    ))
}

fn lower_bound_certification() -> Outcome {
    let start = Instant::now();
    let max_max = gen_max_max_instance(1).map_err(|e| e.to_string())?;
    let avg_max = gen_avg_max_family(10).map_err(|e| e.to_string())?;
    let max_avg = gen_max_avg_family(10).map_err(|e| e.to_string())?;
    let mut unanimous = 0;
    let mut ordinal = 0;
    for mech in shipped() {
        if mech.is_unanimous() {
            let c = certify_lower_bound(&max_max, &mech).map_err(|e| e.to_string())?;
            check(c.achieved_ratio >= 3.0 - 1e-12, || {
                format!("{mech}: forced only {} on MAX∘MAX", c.achieved_ratio)
            })?;
            unanimous += 1;
        }
        if mech.information() == Information::Ordinal {
            for fam in [&avg_max, &max_avg] {
                let c = certify_lower_bound(fam, &mech).map_err(|e| e.to_string())?;
                check(c.achieved_ratio >= 4.2, || {
                    format!("{mech}: forced only {} on {}", c.achieved_ratio, fam.name)
                })?;
            }
            ordinal += 1;
        }
    }
    let golden = 2.0 + 5f64.sqrt();
    for gen in [gen_avg_max_family, gen_max_avg_family] {
        let targets: Vec<f64> = (5..=12)
            .map(|f| gen(f).map(|fam| fam.target_ratio))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        check(targets.windows(2).all(|w| w[0] <= w[1] + 1e-12), || {
            format!("targets not monotone: {targets:?}")
        })?;
        check(targets.iter().all(|&t| t <= golden + 1e-12), || {
            format!("targets overshoot: {targets:?}")
        })?;
        check(golden - targets[targets.len() - 1] < 1e-3, || {
            format!("targets stall: {targets:?}")
        })?;
    }
    within(Duration::from_secs(10), start, "certification")?;
    Ok(format!(
        "{unanimous} unanimous mechanisms forced to 3, {ordinal} ordinal mechanisms forced to >= 4.2 on both families; targets monotone toward 2+√5"
    ))
}

fn arl_tightness() -> Outcome {
    let start = Instant::now();
    let lambda = 1.0 + SQRT2;
    let mech = Mechanism::lambda_arl(lambda, None).map_err(|e| e.to_string())?;
    let fam = gen_cardinal_line_family().map_err(|e| e.to_string())?;
    let c = certify_lower_bound(&fam, &mech).map_err(|e| e.to_string())?;
    check(c.achieved_ratio <= lambda + 1e-9, || {
        format!("achieved {}", c.achieved_ratio)
    })?;

    let i1 = Instance::line(&[vec![2.0 - SQRT2]], &[0.0, 2.0]).map_err(|e| e.to_string())?;
    check(
        i1.ordinal_profile().rankings.iter().all(|r| r[0] == 0),
        || "I1 agents do not top a".into(),
    )?;
    let trace = mech
        .run(&i1, &ComposedObjective::max_max())
        .map_err(|e| e.to_string())?;
    check(trace.representatives == vec![1], || {
        format!("I1 representatives {:?}", trace.representatives)
    })?;
    within(Duration::from_secs(1), start, "tightness")?;
    Ok(format!(
        "achieved {:.12} <= 1+√2; I1 elects b although every agent tops a",
        c.achieved_ratio
    ))
}

fn rule_level_distortion() -> Outcome {
    let start = Instant::now();
    let metrics = [
        MetricKind::Line,
        MetricKind::Euclidean { dimension: 2 },
        MetricKind::Graph,
    ];
    let mut worst_pm = 0.0f64;
    let mut worst_pm_on_alts = 0.0f64;
    for t in 0..SAMPLES {
        for on_alternatives in [false, true] {
            let gen = RandomInstances {
                agents: (1, 12),
                alternatives: (1, 5),
                districts: (1, 1),
                agents_on_alternatives: on_alternatives,
                ..RandomInstances::with_metric(metrics[(t % 3) as usize])
            };
            let inst = gen
                .sample(&mut trial_rng(77, t))
                .map_err(|e| e.to_string())?;
            let voters: Vec<usize> = (0..inst.num_agents()).collect();
            let total = |j: usize| voters.iter().map(|&i| inst.agent_alt(i, j)).sum::<f64>();
            let best = (0..inst.num_alternatives())
                .map(total)
                .fold(f64::INFINITY, f64::min);

            let pm = plurality_matching_rule(&inst.ordinal_profile()).map_err(|e| e.to_string())?;
            let ratio = if best > 0.0 {
                total(pm) / best
            } else if total(pm) == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            if on_alternatives {
                worst_pm_on_alts = worst_pm_on_alts.max(ratio);
            } else {
                worst_pm = worst_pm.max(ratio);
            }

            for inner in [InnerObjective::Avg, InnerObjective::Max] {
                let w = optimal_rule(&inst, &voters, &inner).map_err(|e| e.to_string())?;
                let value = |j: usize| {
                    inner.apply(
                        &voters
                            .iter()
                            .map(|&i| inst.agent_alt(i, j))
                            .collect::<Vec<_>>(),
                    )
                };
                let opt = (0..inst.num_alternatives())
                    .map(value)
                    .fold(f64::INFINITY, f64::min);
                check(value(w) == opt, || {
                    format!("optimal rule off optimum at trial {t}")
                })?;
            }
        }

        // median over pseudo-agents on a line against an exhaustive scan
        let mut rng = trial_rng(78, t);
        let alts: Vec<f64> = (0..rng.gen_range(1..=6))
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        let inst = Instance::line(&[vec![0.0]], &alts).map_err(|e| e.to_string())?;
        let located: Vec<usize> = (0..rng.gen_range(1..=9))
            .map(|_| rng.gen_range(0..alts.len()))
            .collect();
        let med = median_line_rule(&inst.pseudo_profile(&located)).map_err(|e| e.to_string())?;
        let total = |j: usize| located.iter().map(|&r| inst.alt_alt(r, j)).sum::<f64>();
        let best = (0..alts.len()).map(total).fold(f64::INFINITY, f64::min);
        check(total(med) <= best + 1e-12, || {
            format!("median not minimal at trial {t}")
        })?;
    }
    check(worst_pm <= 3.0 + 1e-9, || {
        format!("plurality matching ratio {worst_pm} > 3")
    })?;
    check(worst_pm_on_alts <= 2.0 + 1e-9, || {
        format!("plurality matching ratio {worst_pm_on_alts} > 2 with agents on alternatives")
    })?;
    within(Duration::from_secs(60), start, "rule checks")?;
    Ok(format!(
        "plurality matching worst {worst_pm:.4} (<= 3), {worst_pm_on_alts:.4} with agents on alternatives (<= 2); optimal and median exact"
    ))
}

fn structural_lemmas() -> Outcome {
    let start = Instant::now();
    let mut rng = trial_rng(90, 0);
    for t in 0..SAMPLES {
        // total line distance is monotone on each side of its minimizer
        let mut voters: Vec<f64> = (0..rng.gen_range(1..=12))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        voters.sort_by(f64::total_cmp);
        let argmin = voters[voters.len().div_ceil(2) - 1];
        let total = |x: f64| voters.iter().map(|v| (v - x).abs()).sum::<f64>();
        let (p, q) = (rng.gen_range(-1.5..1.5f64), rng.gen_range(-1.5..1.5f64));
        let (x, y) = if (p - argmin).abs() <= (q - argmin).abs() {
            (p, q)
        } else {
            (q, p)
        };
        if (y < x && x <= argmin) || (argmin <= x && x < y) {
            check(total(x) <= total(y) + 1e-12, || {
                format!("sum monotonicity fails at sample {t}")
            })?;
        }
    }
    let metrics = [
        MetricKind::Line,
        MetricKind::Euclidean { dimension: 2 },
        MetricKind::Graph,
    ];
    for t in 0..SAMPLES {
        let gen = RandomInstances::with_metric(metrics[(t % 3) as usize]);
        let inst = gen
            .sample(&mut trial_rng(91, t))
            .map_err(|e| e.to_string())?;
        let mut rng = trial_rng(92, t);
        let k = rng.gen_range(1..=6);
        let reps: Vec<usize> = (0..k)
            .map(|_| rng.gen_range(0..inst.num_alternatives()))
            .collect();
        let total = |j: usize| reps.iter().map(|&r| inst.alt_alt(r, j)).sum::<f64>();
        let among = reps.iter().map(|&j| total(j)).fold(f64::INFINITY, f64::min);
        let overall = (0..inst.num_alternatives())
            .map(total)
            .fold(f64::INFINITY, f64::min);
        let factor = 2.0 * (k as f64 - 1.0) / k as f64;
        check(among <= factor * overall + 1e-9, || {
            format!("representative inequality fails at sample {t}")
        })?;
    }
    let mut inners = vec![InnerObjective::Avg, InnerObjective::Max];
    for p in [1.5, 2.0, 3.0] {
        inners.push(InnerObjective::power_mean(p).map_err(|e| e.to_string())?);
    }
    for g in &inners {
        for r in check_properties(g, SAMPLES as usize, 5).map_err(|e| e.to_string())? {
            check(r.passed, || format!("{} fails {}", r.inner, r.property))?;
        }
    }
    within(Duration::from_secs(30), start, "lemma checks")?;
    Ok("sum monotonicity, representative inequality and property checks (avg, max, pmean 1.5/2/3) hold".into())
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("acceptance-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.join(format!("run{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_distort"))
            .args([
                "verify-bounds",
                "--seed",
                "17",
                "--out",
                path.to_str().unwrap(),
            ])
            .status()
            .map_err(|e| e.to_string())?;
        check(status.success(), || {
            format!("verify-bounds exited with {status}")
        })?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    std::fs::remove_dir_all(&dir).ok();
    check(outputs[0] == outputs[1], || {
        "CSV differs between runs".into()
    })?;
    let rows = outputs[0].iter().filter(|&&b| b == b'\n').count() - 1;
    Ok(format!(
        "two default verify-bounds runs, {rows} rows, byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("proof-instance arithmetic", proof_instance_arithmetic),
        ("upper-bound sweeps", upper_bound_sweeps),
        ("lower-bound certification", lower_bound_certification),
        ("matching tightness at 1+√2", arl_tightness),
        ("rule-level distortion", rule_level_distortion),
        ("structural lemmas", structural_lemmas),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({took:.2}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({took:.2}s): {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
