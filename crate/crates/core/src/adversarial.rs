//! Lower-bound instance families.
//!
//! Each family is a short list of two-alternative line instances `a`, `b`
//! together with the ratio a mechanism suffers if it makes the "wrong" choice
//! on each. An ordinal mechanism sees the same profile in several of them, so
//! whatever it decides, one instance forces a large ratio.
//!
//! Instances rely on agents that are equidistant from `a` and `b`; their
//! declared rankings pin down which side they prefer. Every instance also comes
//! in relabelled variants (alternative indices swapped, district order and
//! agent order reversed, line reflected) because mechanisms break ties by
//! index or position and a fixed labelling would let them dodge the bound.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::distortion::evaluate;
use crate::error::{Error, Result};
use crate::instances::{AltId, Instance};
use crate::mechanisms::Mechanism;
use crate::objectives::ComposedObjective;

/// Largest district (or agent) count a family constructor will build.
pub const MAX_FAMILY_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pref {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Relabelling {
    pub swap_alternatives: bool,
    pub reverse_districts: bool,
    pub reverse_agents: bool,
    pub reflect: bool,
}

impl Relabelling {
    fn all() -> impl Iterator<Item = Relabelling> {
        (0..16u8).map(|bits| Relabelling {
            swap_alternatives: bits & 1 != 0,
            reverse_districts: bits & 2 != 0,
            reverse_agents: bits & 4 != 0,
            reflect: bits & 8 != 0,
        })
    }

    fn tag(self) -> String {
        let flags = [
            (self.swap_alternatives, "swap"),
            (self.reverse_districts, "rev-districts"),
            (self.reverse_agents, "rev-agents"),
            (self.reflect, "reflect"),
        ];
        let on: Vec<&str> = flags.iter().filter(|f| f.0).map(|f| f.1).collect();
        if on.is_empty() {
            String::new()
        } else {
            format!(" [{}]", on.join(","))
        }
    }
}

/// One concrete instance of a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyInstance {
    pub label: String,
    #[serde(skip)]
    pub instance: Instance,
    pub a: AltId,
    pub b: AltId,
    /// Closed-form objective values of `a` and `b`.
    pub expected_costs: [f64; 2],
    /// Ratio forced when the mechanism picks the worse of `a` and `b`.
    pub forced_ratio: f64,
    pub relabelling: Relabelling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundFamily {
    pub name: String,
    #[serde(serialize_with = "display")]
    pub objective: ComposedObjective,
    /// The smallest forced ratio over the base instances: any mechanism the
    /// family argument applies to suffers at least this much somewhere.
    pub target_ratio: f64,
    pub instances: Vec<FamilyInstance>,
    pub decision_script: String,
}

fn display<S: serde::Serializer, T: std::fmt::Display>(
    v: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

struct Base {
    label: &'static str,
    districts: Vec<Vec<(f64, Pref)>>,
    pos_a: f64,
    pos_b: f64,
    expected: [f64; 2],
    forced: f64,
}

fn realize(base: &Base, r: Relabelling) -> Result<FamilyInstance> {
    let (a, b) = if r.swap_alternatives { (1, 0) } else { (0, 1) };
    let map = |x: f64| {
        if r.reflect {
            base.pos_a + base.pos_b - x
        } else {
            x
        }
    };
    let mut alts = [0.0; 2];
    alts[a] = map(base.pos_a);
    alts[b] = map(base.pos_b);

    let mut districts = base.districts.clone();
    if r.reverse_districts {
        districts.reverse();
    }
    if r.reverse_agents {
        districts.iter_mut().for_each(|d| d.reverse());
    }
    let positions: Vec<Vec<f64>> = districts
        .iter()
        .map(|d| d.iter().map(|&(x, _)| map(x)).collect())
        .collect();
    let rankings = districts
        .iter()
        .flatten()
        .map(|&(_, p)| match p {
            Pref::A => vec![a, b],
            Pref::B => vec![b, a],
        })
        .collect();
    let instance = Instance::line(&positions, &alts)?.with_rankings(rankings)?;
    Ok(FamilyInstance {
        label: format!("{}{}", base.label, r.tag()),
        instance,
        a,
        b,
        expected_costs: base.expected,
        forced_ratio: base.forced,
        relabelling: r,
    })
}

fn assemble(
    name: String,
    objective: ComposedObjective,
    bases: Vec<Base>,
    script: &str,
) -> Result<LowerBoundFamily> {
    let target_ratio = bases.iter().map(|b| b.forced).fold(f64::INFINITY, f64::min);
    let mut instances = Vec::new();
    for base in &bases {
        for r in Relabelling::all() {
            instances.push(realize(base, r)?);
        }
    }
    Ok(LowerBoundFamily {
        name,
        objective,
        target_ratio,
        instances,
        decision_script: script.to_string(),
    })
}

/// Consecutive Fibonacci numbers `(F(n), F(n+1))` with `F(1) = F(2) = 1`.
pub fn fibonacci_pair(index: usize) -> (usize, usize) {
    let (mut x, mut y) = (1usize, 1usize);
    for _ in 1..index {
        (x, y) = (y, x.saturating_add(y));
    }
    (x, y)
}

fn fib_params(fib_index: usize) -> Result<(usize, usize)> {
    if fib_index < 5 {
        return Err(Error::InvalidParameter(format!(
            "fib_index must be at least 5, got {fib_index}"
        )));
    }
    let (x, y) = fibonacci_pair(fib_index);
    if x.saturating_add(y) > MAX_FAMILY_SIZE {
        return Err(Error::TooLarge(format!(
            "fib_index {fib_index} needs {} districts",
            x + y
        )));
    }
    Ok((x, y))
}

/// AVG∘MAX family for ordinal mechanisms with `x, y` consecutive Fibonacci
/// numbers; the forced ratio approaches `2 + √5`.
pub fn gen_avg_max_family(fib_index: usize) -> Result<LowerBoundFamily> {
    let (x, y) = fib_params(fib_index)?;
    let (xf, yf) = (x as f64, y as f64);
    let total = xf + yf;

    let i1 = Base {
        label: "I1",
        districts: vec![
            vec![(0.5, Pref::A), (1.5, Pref::B)],
            vec![(1.0, Pref::B), (1.0, Pref::B)],
        ],
        pos_a: 0.0,
        pos_b: 1.0,
        expected: [5.0 / 4.0, 1.0 / 4.0],
        forced: 5.0,
    };
    let mut d2 = vec![vec![(0.5, Pref::A)]; x];
    d2.extend(vec![vec![(1.0, Pref::B)]; y]);
    let i2 = Base {
        label: "I2",
        districts: d2,
        pos_a: 0.0,
        pos_b: 1.0,
        expected: [(xf + 2.0 * yf) / (2.0 * total), xf / (2.0 * total)],
        forced: 1.0 + 2.0 * yf / xf,
    };
    let mut d3 = vec![vec![(0.0, Pref::A), (0.0, Pref::A)]; x];
    d3.extend(vec![vec![(-0.5, Pref::A), (0.5, Pref::B)]; y]);
    let i3 = Base {
        label: "I3",
        districts: d3,
        pos_a: 0.0,
        pos_b: 1.0,
        expected: [yf / (2.0 * total), (2.0 * xf + 3.0 * yf) / (2.0 * total)],
        forced: 3.0 + 2.0 * xf / yf,
    };
    assemble(
        format!("avg-max:{fib_index}"),
        ComposedObjective::avg_max(),
        vec![i1, i2, i3],
        "I1: electing a with a mixed district and a b-district costs 5, so the mixed district must send b. \
         I2: with x a-representatives and y b-representatives, electing a costs 1+2y/x, so b must win. \
         I3: x unanimous a-districts and y mixed districts then elect b at cost 3+2x/y.",
    )
}

/// MAX∘MAX instance for unanimous mechanisms: two districts of `x` agents
/// each, forced ratio 3.
pub fn gen_max_max_instance(x: usize) -> Result<LowerBoundFamily> {
    if x == 0 {
        return Err(Error::InvalidParameter(
            "districts need at least one agent".into(),
        ));
    }
    if 2 * x > MAX_FAMILY_SIZE {
        return Err(Error::TooLarge(format!("{x} agents per district")));
    }
    let base = Base {
        label: "I",
        districts: vec![vec![(0.0, Pref::A); x], vec![(2.0, Pref::B); x]],
        pos_a: 1.0,
        pos_b: 3.0,
        expected: [1.0, 3.0],
        forced: 3.0,
    };
    assemble(
        format!("max-max:{x}"),
        ComposedObjective::max_max(),
        vec![base],
        "Unanimity fixes the representatives to a and b; electing b costs 3 while a costs 1.",
    )
}

/// MAX∘AVG family for ordinal mechanisms with `θ ≈ F(n)/F(n+1)`; both forced
/// ratios approach `2 + √5`.
pub fn gen_max_avg_family(fib_index: usize) -> Result<LowerBoundFamily> {
    let (p, q) = fib_params(fib_index)?;
    let theta = p as f64 / q as f64;

    let mut d1 = vec![(0.0, Pref::A); p];
    d1.extend(vec![(0.5, Pref::B); q - p]);
    let i1 = Base {
        label: "I1",
        districts: vec![d1],
        pos_a: 0.0,
        pos_b: 1.0,
        expected: [(1.0 - theta) / 2.0, (1.0 + theta) / 2.0],
        forced: (1.0 + theta) / (1.0 - theta),
    };
    let mut first = vec![(0.5, Pref::A); p];
    first.extend(vec![(1.0, Pref::B); q - p]);
    let second = vec![(1.0 + theta / 2.0, Pref::B); q];
    let i2 = Base {
        label: "I2",
        districts: vec![first, second],
        pos_a: 0.0,
        pos_b: 1.0,
        expected: [(2.0 + theta) / 2.0, theta / 2.0],
        forced: (2.0 + theta) / theta,
    };
    assemble(
        format!("max-avg:{fib_index}"),
        ComposedObjective::max_avg(),
        vec![i1, i2],
        "I1: a single district with a θ-fraction preferring a must elect a, or pay (1+θ)/(1-θ). \
         I2: that district then sends a next to a unanimous b-district, and electing a pays (2+θ)/θ.",
    )
}

/// MAX∘G family for every mechanism on the line (single-agent districts, so
/// G does not matter); forced ratio `1 + √2`.
pub fn gen_cardinal_line_family() -> Result<LowerBoundFamily> {
    let s = std::f64::consts::SQRT_2;
    let near = 2.0 - s;
    let far = 2.0 + s;
    let bases = vec![
        Base {
            label: "I1",
            districts: vec![vec![(near, Pref::A)]],
            pos_a: 0.0,
            pos_b: 2.0,
            expected: [near, s],
            forced: s / near,
        },
        Base {
            label: "I2",
            districts: vec![vec![(far, Pref::B)]],
            pos_a: 0.0,
            pos_b: 2.0,
            expected: [far, s],
            forced: far / s,
        },
        Base {
            label: "I3",
            districts: vec![vec![(near, Pref::A)], vec![(far, Pref::B)]],
            pos_a: 0.0,
            pos_b: 2.0,
            expected: [far, s],
            forced: far / s,
        },
    ];
    assemble(
        "cardinal-line".into(),
        ComposedObjective::max_max(),
        bases,
        "I1 forces representative a, I2 forces b; with one of each in I3, electing a costs 1+√2.",
    )
}

/// Looks a family up by its CLI name: `max-max[:x]`, `avg-max[:fib]`,
/// `max-avg[:fib]` or `cardinal-line`.
pub fn family_by_name(name: &str) -> Result<LowerBoundFamily> {
    let (head, arg) = match name.trim().split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name.trim(), None),
    };
    let num = |default: usize| -> Result<usize> {
        arg.map_or(Ok(default), |a| {
            a.parse()
                .map_err(|_| Error::parse(name, "family parameter must be an integer"))
        })
    };
    match head {
        "max-max" => gen_max_max_instance(num(1)?),
        "avg-max" => gen_avg_max_family(num(10)?),
        "max-avg" => gen_max_avg_family(num(10)?),
        "cardinal-line" if arg.is_none() => gen_cardinal_line_family(),
        _ => Err(Error::parse(name, "unknown family")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub family: String,
    pub mechanism: String,
    /// Largest ratio over all family instances.
    pub achieved_ratio: f64,
    pub target_ratio: f64,
    pub per_instance: Vec<(String, f64)>,
}

/// Runs the mechanism on every family instance and reports the worst ratio.
pub fn certify_lower_bound(
    family: &LowerBoundFamily,
    mechanism: &Mechanism,
) -> Result<Certification> {
    let mut per_instance = Vec::with_capacity(family.instances.len());
    let mut achieved = f64::NEG_INFINITY;
    for fi in &family.instances {
        let report = evaluate(mechanism, &fi.instance, &family.objective)?;
        achieved = achieved.max(report.ratio);
        per_instance.push((fi.label.clone(), report.ratio));
    }
    Ok(Certification {
        family: family.name.clone(),
        mechanism: mechanism.to_string(),
        achieved_ratio: achieved,
        target_ratio: family.target_ratio,
        per_instance,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    family: &'a str,
    source: String,
    objective: String,
    target_ratio: f64,
    decision_script: &'a str,
    instances: Vec<ManifestEntry<'a>>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    file: String,
    #[serde(flatten)]
    info: &'a FamilyInstance,
}

/// Writes each instance as JSON plus a `manifest.json` describing the family.
pub fn export_bundle(family: &LowerBoundFamily, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(family.instances.len());
    for (k, fi) in family.instances.iter().enumerate() {
        let file = format!("{k:03}.json");
        fs::write(dir.join(&file), fi.instance.to_json())?;
        entries.push(ManifestEntry { file, info: fi });
    }
    let manifest = Manifest {
        family: &family.name,
        source: format!(
            "lower-bound construction for {} (target ratio {:.6})",
            family.objective, family.target_ratio
        ),
        objective: family.objective.to_string(),
        target_ratio: family.target_ratio,
        decision_script: &family.decision_script,
        instances: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    fs::write(dir.join("manifest.json"), text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::cost;

    #[test]
    fn fibonacci_pairs() {
        assert_eq!(fibonacci_pair(1), (1, 1));
        assert_eq!(fibonacci_pair(5), (5, 8));
        assert_eq!(fibonacci_pair(7), (13, 21));
        assert_eq!(fibonacci_pair(10), (55, 89));
    }

    #[test]
    fn family_parameter_limits() {
        assert!(matches!(
            gen_avg_max_family(4),
            Err(Error::InvalidParameter(_))
        ));
        assert!(gen_avg_max_family(18).is_ok());
        assert!(matches!(gen_avg_max_family(19), Err(Error::TooLarge(_))));
        assert!(matches!(gen_max_avg_family(40), Err(Error::TooLarge(_))));
        assert!(matches!(
            gen_max_max_instance(0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn avg_max_forced_ratios_at_13_21() {
        let fam = gen_avg_max_family(7).unwrap();
        let by_label = |l: &str| fam.instances.iter().find(|f| f.label == l).unwrap();
        assert!((by_label("I2").forced_ratio - (1.0 + 42.0 / 13.0)).abs() < 1e-12);
        assert!((by_label("I3").forced_ratio - (3.0 + 26.0 / 21.0)).abs() < 1e-12);
        // evaluate the constructed instances rather than trusting the formula
        for label in ["I2", "I3"] {
            let fi = by_label(label);
            let ca = cost(&fi.instance, &fam.objective, fi.a).unwrap();
            let cb = cost(&fi.instance, &fam.objective, fi.b).unwrap();
            assert!(
                (ca.max(cb) / ca.min(cb) - fi.forced_ratio).abs() < 1e-12,
                "{label}"
            );
        }
    }

    #[test]
    fn max_avg_i1_at_13_21() {
        let fam = gen_max_avg_family(7).unwrap();
        let i1 = fam.instances.iter().find(|f| f.label == "I1").unwrap();
        let ca = cost(&i1.instance, &fam.objective, i1.a).unwrap();
        let cb = cost(&i1.instance, &fam.objective, i1.b).unwrap();
        assert!((cb / ca - 4.25).abs() < 1e-12);
    }

    #[test]
    fn max_max_costs_do_not_depend_on_size() {
        for x in [1, 5] {
            let fam = gen_max_max_instance(x).unwrap();
            for fi in &fam.instances {
                assert_eq!(cost(&fi.instance, &fam.objective, fi.a).unwrap(), 1.0);
                assert_eq!(cost(&fi.instance, &fam.objective, fi.b).unwrap(), 3.0);
                assert!(fi.instance.districts().iter().all(|d| d.len() == x));
            }
        }
    }

    #[test]
    fn relabellings_keep_costs() {
        for fam in [
            gen_avg_max_family(6).unwrap(),
            gen_cardinal_line_family().unwrap(),
        ] {
            assert_eq!(fam.instances.len() % 16, 0);
            for fi in &fam.instances {
                let ca = cost(&fi.instance, &fam.objective, fi.a).unwrap();
                let cb = cost(&fi.instance, &fam.objective, fi.b).unwrap();
                assert!((ca - fi.expected_costs[0]).abs() < 1e-12, "{}", fi.label);
                assert!((cb - fi.expected_costs[1]).abs() < 1e-12, "{}", fi.label);
            }
        }
    }

    #[test]
    fn names_resolve() {
        assert_eq!(family_by_name("max-max").unwrap().name, "max-max:1");
        assert_eq!(family_by_name("avg-max:8").unwrap().name, "avg-max:8");
        assert_eq!(family_by_name("max-avg").unwrap().name, "max-avg:10");
        assert!(family_by_name("cardinal-line").is_ok());
        assert!(family_by_name("cardinal-line:3").is_err());
        assert!(family_by_name("nope").is_err());
    }
}
