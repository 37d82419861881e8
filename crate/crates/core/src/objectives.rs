//! Composed objectives `outer ∘ inner`: the inner function aggregates one
//! district's agent distances, the outer one aggregates the per-district values.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{AltId, DistrictId, Instance};

/// Slack for arithmetic identities. Comparisons scale it by the magnitude of
/// the compared values once they exceed 1.
pub const ARITH_TOLERANCE: f64 = 1e-12;

/// Default sample count for the property checks.
pub const DEFAULT_SAMPLES: usize = 10_000;

pub(crate) fn leq(a: f64, b: f64) -> bool {
    a <= b + ARITH_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    leq(a, b) && leq(b, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Monotone,
    Subadditive,
    Consistent,
    SinglePeaked,
}

impl Property {
    pub const ALL: [Property; 4] = [
        Property::Monotone,
        Property::Subadditive,
        Property::Consistent,
        Property::SinglePeaked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Monotone => "monotone",
            Property::Subadditive => "subadditive",
            Property::Consistent => "consistent",
            Property::SinglePeaked => "single-peaked",
        }
    }
}

type InnerFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied inner function with the properties it claims to satisfy.
#[derive(Clone)]
pub struct CustomInner {
    pub name: String,
    pub func: Arc<InnerFn>,
    pub declared: Vec<Property>,
}

impl fmt::Debug for CustomInner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomInner")
            .field("name", &self.name)
            .field("declared", &self.declared)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum InnerObjective {
    Avg,
    Max,
    /// `((1/n) Σ vᵢᵖ)^(1/p)` for `p ≥ 1`.
    PowerMean(f64),
    Custom(CustomInner),
}

impl PartialEq for InnerObjective {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (InnerObjective::Avg, InnerObjective::Avg)
            | (InnerObjective::Max, InnerObjective::Max) => true,
            (InnerObjective::PowerMean(p), InnerObjective::PowerMean(q)) => p == q,
            (InnerObjective::Custom(a), InnerObjective::Custom(b)) => a.name == b.name,
            _ => false,
        }
    }
}

impl InnerObjective {
    pub fn custom<F>(name: &str, declared: &[Property], func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        InnerObjective::Custom(CustomInner {
            name: name.to_string(),
            func: Arc::new(func),
            declared: declared.to_vec(),
        })
    }

    pub fn power_mean(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power mean needs p ≥ 1, got {p}"
            )));
        }
        Ok(InnerObjective::PowerMean(p))
    }

    /// `(Σv)²`: monotone, but neither subadditive nor consistent. Declares all
    /// four properties so the checks have something to reject.
    pub fn sum_squared() -> Self {
        InnerObjective::custom("sumsq", &Property::ALL, |v| {
            let s: f64 = v.iter().sum();
            s * s
        })
    }

    pub fn apply(&self, v: &[f64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        match self {
            InnerObjective::Avg => v.iter().sum::<f64>() / v.len() as f64,
            InnerObjective::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            InnerObjective::PowerMean(p) => {
                let mean = v.iter().map(|x| x.powf(*p)).sum::<f64>() / v.len() as f64;
                mean.powf(1.0 / p)
            }
            InnerObjective::Custom(c) => (c.func)(v),
        }
    }

    /// Properties this objective is expected to satisfy.
    pub fn declared_properties(&self) -> Vec<Property> {
        match self {
            InnerObjective::Custom(c) => c.declared.clone(),
            _ => Property::ALL.to_vec(),
        }
    }

    pub fn is_custom(&self) -> bool {
        matches!(self, InnerObjective::Custom(_))
    }
}

impl fmt::Display for InnerObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerObjective::Avg => write!(f, "avg"),
            InnerObjective::Max => write!(f, "max"),
            InnerObjective::PowerMean(p) => write!(f, "pmean:{p}"),
            InnerObjective::Custom(c) => write!(f, "{}", c.name),
        }
    }
}

impl FromStr for InnerObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "avg" => Ok(InnerObjective::Avg),
            "max" => Ok(InnerObjective::Max),
            "sumsq" => Ok(InnerObjective::sum_squared()),
            other => {
                let p = other
                    .strip_prefix("pmean:")
                    .ok_or_else(|| Error::parse(s, "expected avg, max, sumsq or pmean:<p>"))?;
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(s, "bad power-mean exponent"))?;
                InnerObjective::power_mean(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterObjective {
    Avg,
    Max,
}

impl OuterObjective {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            OuterObjective::Avg => InnerObjective::Avg.apply(v),
            OuterObjective::Max => InnerObjective::Max.apply(v),
        }
    }

    /// The same aggregation viewed as a function of pseudo-agent distances.
    pub fn as_inner(self) -> InnerObjective {
        match self {
            OuterObjective::Avg => InnerObjective::Avg,
            OuterObjective::Max => InnerObjective::Max,
        }
    }
}

impl fmt::Display for OuterObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OuterObjective::Avg => "avg",
            OuterObjective::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedObjective {
    pub outer: OuterObjective,
    pub inner: InnerObjective,
}

impl ComposedObjective {
    pub fn new(outer: OuterObjective, inner: InnerObjective) -> Self {
        ComposedObjective { outer, inner }
    }

    pub fn avg_avg() -> Self {
        Self::new(OuterObjective::Avg, InnerObjective::Avg)
    }

    pub fn avg_max() -> Self {
        Self::new(OuterObjective::Avg, InnerObjective::Max)
    }

    pub fn max_avg() -> Self {
        Self::new(OuterObjective::Max, InnerObjective::Avg)
    }

    pub fn max_max() -> Self {
        Self::new(OuterObjective::Max, InnerObjective::Max)
    }

    /// The four AVG/MAX compositions.
    pub fn canonical() -> [ComposedObjective; 4] {
        [
            Self::avg_avg(),
            Self::avg_max(),
            Self::max_avg(),
            Self::max_max(),
        ]
    }
}

impl fmt::Display for ComposedObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.outer, self.inner)
    }
}

impl FromStr for ComposedObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (outer, inner) = s
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::parse(s, "expected <outer>.<inner>"))?;
        let outer = match outer {
            "avg" => OuterObjective::Avg,
            "max" => OuterObjective::Max,
            _ => return Err(Error::parse(s, "outer objective must be avg or max")),
        };
        Ok(ComposedObjective::new(outer, inner.parse()?))
    }
}

/// Inner objective of one district's distance vector to `alternative`.
pub fn inner_cost(
    instance: &Instance,
    district: DistrictId,
    inner: &InnerObjective,
    alternative: AltId,
) -> Result<f64> {
    let members = instance.district(district)?;
    instance.check_alternative(alternative)?;
    Ok(inner_cost_of(instance, members, inner, alternative))
}

pub(crate) fn inner_cost_of(
    instance: &Instance,
    agents: &[usize],
    inner: &InnerObjective,
    alternative: AltId,
) -> f64 {
    let v: Vec<f64> = agents
        .iter()
        .map(|&i| instance.agent_alt(i, alternative))
        .collect();
    inner.apply(&v)
}

pub fn cost(instance: &Instance, objective: &ComposedObjective, alternative: AltId) -> Result<f64> {
    instance.check_alternative(alternative)?;
    Ok(cost_unchecked(instance, objective, alternative))
}

fn cost_unchecked(instance: &Instance, objective: &ComposedObjective, alternative: AltId) -> f64 {
    let per_district: Vec<f64> = instance
        .districts()
        .iter()
        .map(|members| inner_cost_of(instance, members, &objective.inner, alternative))
        .collect();
    objective.outer.apply(&per_district)
}

/// Cost of every alternative, by index.
pub fn all_costs(instance: &Instance, objective: &ComposedObjective) -> Vec<f64> {
    (0..instance.num_alternatives())
        .map(|j| cost_unchecked(instance, objective, j))
        .collect()
}

/// Exhaustive argmin over alternatives; ties go to the lowest index.
pub fn optimal_alternative(instance: &Instance, objective: &ComposedObjective) -> (AltId, f64) {
    argmin(&all_costs(instance, objective))
}

pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// Counterexample found by a property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub vectors: Vec<Vec<f64>>,
    pub scalar: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum CheckOutcome {
    Pass,
    Fail(Witness),
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CheckOutcome::Pass)
    }
}

fn sample_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.0..4.0)).collect()
}

fn sample_len(rng: &mut ChaCha8Rng, dims: usize) -> usize {
    rng.gen_range(1..=dims.max(1))
}

/// Samples pairs `v ≤ u` coordinate-wise and checks `g(v) ≤ g(u)`.
pub fn check_monotone(g: &InnerObjective, samples: usize, dims: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples.max(1) {
        let len = sample_len(&mut rng, dims);
        let v = sample_vector(&mut rng, len);
        let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..2.0)).collect();
        let (gv, gu) = (g.apply(&v), g.apply(&u));
        if !leq(gv, gu) {
            return CheckOutcome::Fail(Witness {
                detail: format!("g(v) = {gv} > g(u) = {gu} with v ≤ u"),
                vectors: vec![v, u],
                scalar: None,
            });
        }
    }
    CheckOutcome::Pass
}

/// Checks `g(v+u) ≤ g(v)+g(u)` and `g(c·v) ≤ c·g(v)` for sampled `c ≥ 1`.
pub fn check_subadditive(
    g: &InnerObjective,
    samples: usize,
    dims: usize,
    seed: u64,
) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples.max(1) {
        let len = sample_len(&mut rng, dims);
        let v = sample_vector(&mut rng, len);
        let u = sample_vector(&mut rng, len);
        let sum: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a + b).collect();
        let (gs, gv, gu) = (g.apply(&sum), g.apply(&v), g.apply(&u));
        if !leq(gs, gv + gu) {
            return CheckOutcome::Fail(Witness {
                detail: format!("g(v+u) = {gs} > g(v) + g(u) = {}", gv + gu),
                vectors: vec![v, u],
                scalar: None,
            });
        }
        let c = rng.gen_range(1.0..4.0);
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let gc = g.apply(&scaled);
        if !leq(gc, c * gv) {
            return CheckOutcome::Fail(Witness {
                detail: format!("g(c·v) = {gc} > c·g(v) = {}", c * gv),
                vectors: vec![v],
                scalar: Some(c),
            });
        }
    }
    CheckOutcome::Pass
}

/// Checks `g(c, …, c) = c` for sampled constants and lengths. The constant 1
/// is always tried first.
pub fn check_consistent(
    g: &InnerObjective,
    samples: usize,
    dims: usize,
    seed: u64,
) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..samples.max(1) {
        let len = sample_len(&mut rng, dims);
        let c = if s == 0 { 1.0 } else { rng.gen_range(0.0..4.0) };
        let v = vec![c; len];
        let gv = g.apply(&v);
        if !approx_eq(gv, c) {
            return CheckOutcome::Fail(Witness {
                detail: format!("g(constant {c}) = {gv}"),
                vectors: vec![v],
                scalar: Some(c),
            });
        }
    }
    CheckOutcome::Pass
}

/// Evaluates `g` on the district's distance vector at every grid position and
/// checks the profile is non-increasing, then non-decreasing. A flat bottom is
/// allowed.
pub fn check_single_peaked(
    g: &InnerObjective,
    instance: &Instance,
    district: DistrictId,
) -> Result<CheckOutcome> {
    if !instance.is_line() {
        return Err(Error::NotLineMetric);
    }
    let members = instance.district(district)?;
    let agents: Vec<f64> = members
        .iter()
        .filter_map(|&i| instance.position(i))
        .collect();
    let mut grid: Vec<f64> = (0..instance.num_points())
        .filter_map(|p| instance.position(p))
        .collect();
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let step = (hi - lo) * 1e-3;
        grid.extend((0..=1000).map(|t| lo + step * t as f64));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(single_peaked_on_grid(g, &agents, &grid))
}

pub(crate) fn single_peaked_on_grid(
    g: &InnerObjective,
    agents: &[f64],
    grid: &[f64],
) -> CheckOutcome {
    let values: Vec<f64> = grid
        .iter()
        .map(|x| {
            let v: Vec<f64> = agents.iter().map(|a| (x - a).abs()).collect();
            g.apply(&v)
        })
        .collect();
    let (bottom, _) = argmin(&values);
    let fail = |a: usize, b: usize, c: usize| {
        CheckOutcome::Fail(Witness {
            detail: format!(
                "g rises to {} at {} between {} and {}",
                values[b], grid[b], grid[a], grid[c]
            ),
            vectors: vec![vec![grid[a], grid[b], grid[c]]],
            scalar: None,
        })
    };
    for t in 0..bottom {
        if !leq(values[t + 1], values[t]) {
            return fail(t, t + 1, bottom);
        }
    }
    for t in bottom..values.len().saturating_sub(1) {
        if !leq(values[t], values[t + 1]) {
            return fail(bottom, t, t + 1);
        }
    }
    CheckOutcome::Pass
}
