//! Distortion of a mechanism on one instance, and searches for bad instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instances::{AltId, Instance, InstanceFile};
use crate::mechanisms::{Mechanism, MechanismTrace};
use crate::objectives::{all_costs, argmin, ComposedObjective};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub mechanism: String,
    pub objective: String,
    pub trace: MechanismTrace,
    pub costs: Vec<f64>,
    pub winner_cost: f64,
    pub optimal_id: AltId,
    pub optimal_cost: f64,
    /// `winner_cost / optimal_cost`; 1 when both vanish, infinite when only the
    /// optimum does.
    #[serde(serialize_with = "serialize_ratio")]
    pub ratio: f64,
}

impl EvaluationReport {
    pub fn is_unbounded(&self) -> bool {
        self.ratio.is_infinite()
    }
}

fn serialize_ratio<S: Serializer>(ratio: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if ratio.is_finite() {
        s.serialize_f64(*ratio)
    } else {
        s.serialize_str("inf")
    }
}

pub fn distortion_ratio(winner_cost: f64, optimal_cost: f64) -> f64 {
    if optimal_cost > 0.0 {
        winner_cost / optimal_cost
    } else if winner_cost > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

pub fn evaluate(
    mechanism: &Mechanism,
    instance: &Instance,
    objective: &ComposedObjective,
) -> Result<EvaluationReport> {
    let trace = mechanism.run(instance, objective)?;
    let costs = all_costs(instance, objective);
    let (optimal_id, optimal_cost) = argmin(&costs);
    let winner_cost = costs[trace.winner];
    Ok(EvaluationReport {
        mechanism: mechanism.to_string(),
        objective: objective.to_string(),
        ratio: distortion_ratio(winner_cost, optimal_cost),
        trace,
        costs,
        winner_cost,
        optimal_id,
        optimal_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricKind {
    Line,
    Euclidean {
        dimension: usize,
    },
    /// Shortest-path metric of a complete graph with random edge weights.
    Graph,
}

/// Random instance family. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInstances {
    pub metric: MetricKind,
    pub agents: (usize, usize),
    pub alternatives: (usize, usize),
    pub districts: (usize, usize),
    /// Coordinates (or edge weights) are uniform on this interval.
    #[serde(default = "unit_interval")]
    pub range: (f64, f64),
    /// Put every agent on a uniformly chosen alternative.
    #[serde(default)]
    pub agents_on_alternatives: bool,
}

fn unit_interval() -> (f64, f64) {
    (0.0, 1.0)
}

impl Default for RandomInstances {
    fn default() -> Self {
        RandomInstances {
            metric: MetricKind::Line,
            agents: (2, 16),
            alternatives: (2, 6),
            districts: (1, 4),
            range: unit_interval(),
            agents_on_alternatives: false,
        }
    }
}

impl RandomInstances {
    pub fn with_metric(metric: MetricKind) -> Self {
        RandomInstances {
            metric,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ranges = [
            ("agents", self.agents),
            ("alternatives", self.alternatives),
            ("districts", self.districts),
        ];
        for (what, (lo, hi)) in ranges {
            if lo == 0 || lo > hi {
                return Err(Error::GeneratorError(format!(
                    "{what} range [{lo}, {hi}] is empty or starts at 0"
                )));
            }
        }
        if self.districts.0 > self.agents.1 {
            return Err(Error::GeneratorError("more districts than agents".into()));
        }
        if !(self.range.0 < self.range.1) || !self.range.0.is_finite() || !self.range.1.is_finite()
        {
            return Err(Error::GeneratorError(
                "position range must be a finite, nonempty interval".into(),
            ));
        }
        if let MetricKind::Euclidean { dimension: 0 } = self.metric {
            return Err(Error::GeneratorError(
                "euclidean dimension must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<Instance> {
        self.validate()?;
        let k = rng.gen_range(self.districts.0..=self.districts.1);
        let n = rng.gen_range(self.agents.0.max(k)..=self.agents.1.max(k));
        let m = rng.gen_range(self.alternatives.0..=self.alternatives.1);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut district_of = vec![0; n];
        for (slot, &i) in order.iter().enumerate() {
            district_of[i] = if slot < k { slot } else { rng.gen_range(0..k) };
        }
        let mut sizes = vec![0usize; k];
        for &d in &district_of {
            sizes[d] += 1;
        }

        let (lo, hi) = self.range;
        let home: Vec<Option<usize>> = (0..n)
            .map(|_| self.agents_on_alternatives.then(|| rng.gen_range(0..m)))
            .collect();
        match self.metric {
            MetricKind::Line => {
                let alts: Vec<f64> = (0..m).map(|_| rng.gen_range(lo..hi)).collect();
                let groups = group(&sizes, &home, |h| match h {
                    Some(j) => alts[j],
                    None => rng.gen_range(lo..hi),
                });
                Instance::line(&groups, &alts)
            }
            MetricKind::Euclidean { dimension } => {
                let point = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
                    (0..dimension).map(|_| rng.gen_range(lo..hi)).collect()
                };
                let alts: Vec<Vec<f64>> = (0..m).map(|_| point(rng)).collect();
                let groups = group(&sizes, &home, |h| match h {
                    Some(j) => alts[j].clone(),
                    None => point(rng),
                });
                Instance::euclidean(&groups, &alts)
            }
            MetricKind::Graph => {
                let total = n + m;
                let mut d = vec![vec![0.0; total]; total];
                for p in 0..total {
                    for q in p + 1..total {
                        let w = rng.gen_range(lo.max(0.0)..hi.max(lo.max(0.0) + 1e-9));
                        d[p][q] = w;
                        d[q][p] = w;
                    }
                }
                // agents sit in district order so consecutive ids match `sizes`
                for (i, h) in home.iter().enumerate() {
                    if let Some(j) = *h {
                        d[i][n + j] = 0.0;
                        d[n + j][i] = 0.0;
                    }
                }
                for via in 0..total {
                    for p in 0..total {
                        for q in 0..total {
                            let alt = d[p][via] + d[via][q];
                            if alt < d[p][q] {
                                d[p][q] = alt;
                            }
                        }
                    }
                }
                Instance::explicit(d, &sizes, m)
            }
        }
    }
}

/// Draws one value per agent and groups them by district in id order.
fn group<T>(
    sizes: &[usize],
    home: &[Option<usize>],
    mut draw: impl FnMut(Option<usize>) -> T,
) -> Vec<Vec<T>> {
    let mut next = 0;
    sizes
        .iter()
        .map(|&s| {
            let out = (next..next + s).map(|i| draw(home[i])).collect();
            next += s;
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Random(RandomInstances),
    Fixed(Instance),
}

impl Generator {
    pub fn generate(&self, rng: &mut impl Rng) -> Result<Instance> {
        match self {
            Generator::Random(spec) => spec.sample(rng),
            Generator::Fixed(instance) => Ok(instance.clone()),
        }
    }
}

/// Per-trial RNG: the sweep seed with the trial index as stream, so trials
/// are independent of evaluation order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub max_ratio: f64,
    pub witness: Instance,
    pub evaluated: usize,
    pub seed: u64,
}

impl SweepResult {
    pub fn witness_file(&self) -> InstanceFile {
        self.witness.to_file()
    }
}

/// Largest ratio over `trials` generated instances. Ties keep the lowest trial.
pub fn sweep(
    mechanism: &Mechanism,
    objective: &ComposedObjective,
    generator: &Generator,
    trials: usize,
    seed: u64,
) -> Result<SweepResult> {
    if trials == 0 {
        return Err(Error::GeneratorError("trials must be at least 1".into()));
    }
    let ratios: Vec<Result<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let instance = generator.generate(&mut trial_rng(seed, t))?;
            Ok(evaluate(mechanism, &instance, objective)?.ratio)
        })
        .collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (t, r) in ratios.into_iter().enumerate() {
        let r = r?;
        if r > best.1 {
            best = (t, r);
        }
    }
    let witness = generator.generate(&mut trial_rng(seed, best.0 as u64))?;
    Ok(SweepResult {
        max_ratio: best.1,
        witness,
        evaluated: trials,
        seed,
    })
}

/// Random-perturbation hill climbing over agent and alternative positions.
///
/// Moves that do not lower the ratio are kept; after a long run without a
/// strict improvement the search restarts from fresh positions spread over the
/// initial span. District structure never changes. Returns the best instance
/// seen, which for `steps == 0` is `init` itself.
pub fn hill_climb(
    mechanism: &Mechanism,
    objective: &ComposedObjective,
    init: &Instance,
    steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<SweepResult> {
    let (Some(groups), Some(_)) = (init.line_positions_by_district(), init.line_axis()) else {
        return Err(Error::NotLineMetric);
    };
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    let alts: Vec<f64> = (0..init.num_alternatives())
        .map(|j| init.alternative_position(j).expect("line"))
        .collect();
    let span = {
        let all = groups.iter().flatten().chain(&alts);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    };
    let patience = (steps / 20).clamp(200, 5_000);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_ratio = evaluate(mechanism, init, objective)?.ratio;
    let mut best = init.clone();
    let mut current = (groups, alts);
    let mut current_ratio = best_ratio;
    let mut stall = 0usize;

    for _ in 0..steps {
        let mut candidate = current.clone();
        let coords = candidate.0.iter().map(Vec::len).sum::<usize>() + candidate.1.len();
        let pick = rng.gen_range(0..coords);
        let delta = rng.gen_range(-step_size..step_size);
        *coordinate(&mut candidate, pick) += delta;
        let instance = Instance::line(&candidate.0, &candidate.1)?;
        let ratio = evaluate(mechanism, &instance, objective)?.ratio;
        if ratio > best_ratio {
            best_ratio = ratio;
            best = instance;
        }
        if ratio > current_ratio {
            stall = 0;
        } else {
            stall += 1;
        }
        if ratio >= current_ratio {
            current = candidate;
            current_ratio = ratio;
        }
        if stall >= patience {
            for g in current.0.iter_mut() {
                for x in g.iter_mut() {
                    *x = rng.gen_range(span.0..=span.1);
                }
            }
            for x in current.1.iter_mut() {
                *x = rng.gen_range(span.0..=span.1);
            }
            current_ratio = evaluate(
                mechanism,
                &Instance::line(&current.0, &current.1)?,
                objective,
            )?
            .ratio;
            stall = 0;
        }
    }
    Ok(SweepResult {
        max_ratio: best_ratio,
        witness: best,
        evaluated: steps + 1,
        seed,
    })
}

fn coordinate(state: &mut (Vec<Vec<f64>>, Vec<f64>), mut pick: usize) -> &mut f64 {
    for g in state.0.iter_mut() {
        if pick < g.len() {
            return &mut g[pick];
        }
        pick -= g.len();
    }
    &mut state.1[pick]
}
