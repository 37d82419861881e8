//! Two-step distributed mechanisms.
//!
//! Every district first picks a representative with the in-district step. The
//! representatives then act as pseudo-agents, one per district and located at
//! their alternative, and the over-districts step picks the winner. A single
//! district skips the second step.
//!
//! Cardinal components (the optimal rule, λ-acceptability) minimize the
//! evaluation objective handed to [`Mechanism::run`]: the inner function in
//! districts and the outer function over pseudo-agents.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{AltId, DistrictId, Instance, OrdinalProfile};
use crate::objectives::{
    check_consistent, check_monotone, check_subadditive, inner_cost_of, leq, single_peaked_on_grid,
    ComposedObjective, InnerObjective, Property, DEFAULT_SAMPLES,
};
use crate::rules::{
    dictator_rule, median_line_rule, optimal_among, plurality_matching_rule, DirectRule,
    Information,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    AllAlternatives,
    RepresentativesOnly,
}

/// How "arbitrary" choices (which dictator, which representative) are made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arbitrary {
    /// Lowest index.
    Lowest,
    /// Pseudo-random but reproducible: district `d` draws from stream `d`.
    Seeded(u64),
}

impl Arbitrary {
    fn pick(self, stream: u64, len: usize) -> usize {
        match self {
            Arbitrary::Lowest => 0,
            Arbitrary::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                rng.gen_range(0..len)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InStep {
    Rule(DirectRule),
    /// Rightmost alternative whose inner cost is within `lambda` of the
    /// district optimum. `inner` defaults to the evaluation objective's.
    LambdaAcceptable {
        lambda: f64,
        inner: Option<InnerObjective>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverStep {
    Rule(DirectRule),
    ArbitraryRepresentative,
    LeftmostRepresentative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    in_step: InStep,
    over_step: OverStep,
    selection: SelectionMode,
    arbitrary: Arbitrary,
}

/// What a mechanism did on one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MechanismTrace {
    pub representatives: Vec<AltId>,
    pub winner: AltId,
    /// Alternatives the over step was allowed to choose from.
    pub candidates: Vec<AltId>,
}

impl Mechanism {
    /// α-in-β-over composition of two direct rules.
    pub fn compose(in_rule: DirectRule, over_rule: DirectRule, selection: SelectionMode) -> Self {
        Mechanism {
            in_step: InStep::Rule(in_rule),
            over_step: OverStep::Rule(over_rule),
            selection,
            arbitrary: Arbitrary::Lowest,
        }
    }

    /// Runs `in_rule` in every district and outputs the representative of the
    /// lowest-indexed district.
    pub fn arbitrary_over(in_rule: DirectRule) -> Self {
        Mechanism {
            in_step: InStep::Rule(in_rule),
            over_step: OverStep::ArbitraryRepresentative,
            selection: SelectionMode::RepresentativesOnly,
            arbitrary: Arbitrary::Lowest,
        }
    }

    /// Dictator in every district, median representative overall. Line only.
    pub fn arbitrary_median() -> Self {
        Mechanism {
            in_step: InStep::Rule(DirectRule::Dictator(0)),
            over_step: OverStep::Rule(DirectRule::Median),
            selection: SelectionMode::RepresentativesOnly,
            arbitrary: Arbitrary::Lowest,
        }
    }

    pub fn arbitrary_dictator() -> Self {
        Self::arbitrary_over(DirectRule::Dictator(0))
    }

    /// λ-acceptable-rightmost in districts, leftmost representative overall.
    ///
    /// A custom inner objective must pass the sampled monotone, subadditive,
    /// consistent and single-peaked checks.
    pub fn lambda_arl(lambda: f64, inner: Option<InnerObjective>) -> Result<Self> {
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::LambdaBelowOne(lambda));
        }
        if let Some(g) = inner.as_ref().filter(|g| g.is_custom()) {
            verify_line_properties(g)?;
        }
        Ok(Mechanism {
            in_step: InStep::LambdaAcceptable { lambda, inner },
            over_step: OverStep::LeftmostRepresentative,
            selection: SelectionMode::RepresentativesOnly,
            arbitrary: Arbitrary::Lowest,
        })
    }

    /// Replaces lowest-index "arbitrary" choices with seeded ones.
    pub fn with_arbitrary(mut self, arbitrary: Arbitrary) -> Self {
        self.arbitrary = arbitrary;
        self
    }

    pub fn in_step(&self) -> &InStep {
        &self.in_step
    }

    pub fn over_step(&self) -> OverStep {
        self.over_step
    }

    pub fn selection(&self) -> SelectionMode {
        self.selection
    }

    pub fn information(&self) -> Information {
        let cardinal = matches!(
            self.in_step,
            InStep::Rule(DirectRule::Optimal) | InStep::LambdaAcceptable { .. }
        ) || matches!(self.over_step, OverStep::Rule(DirectRule::Optimal));
        if cardinal {
            Information::Cardinal
        } else {
            Information::Ordinal
        }
    }

    /// Whether a district whose agents all rank `a` first always gets `a`.
    /// Only λ-acceptability can deviate.
    pub fn is_unanimous(&self) -> bool {
        !matches!(self.in_step, InStep::LambdaAcceptable { .. })
    }

    pub fn requires_line(&self) -> bool {
        matches!(
            self.in_step,
            InStep::LambdaAcceptable { .. } | InStep::Rule(DirectRule::Median)
        ) || matches!(
            self.over_step,
            OverStep::Rule(DirectRule::Median) | OverStep::LeftmostRepresentative
        )
    }

    fn check_compatible(&self, instance: &Instance) -> Result<()> {
        if instance.is_line() || !self.requires_line() {
            return Ok(());
        }
        match (&self.in_step, self.over_step) {
            (InStep::LambdaAcceptable { .. }, _) | (_, OverStep::LeftmostRepresentative) => {
                Err(Error::NotLineMetric)
            }
            (InStep::Rule(DirectRule::Dictator(_)), OverStep::Rule(DirectRule::Median)) => {
                Err(Error::NotLineMetric)
            }
            _ => Err(Error::IncompatibleRuleMetric {
                rule: DirectRule::Median.to_string(),
                reason: "the median rule needs a line metric".into(),
            }),
        }
    }

    /// Runs both steps. `target` supplies the cost functions that cardinal
    /// components minimize; ordinal components never look at it.
    pub fn run(&self, instance: &Instance, target: &ComposedObjective) -> Result<MechanismTrace> {
        self.check_compatible(instance)?;
        let profile =
            matches!(self.in_step, InStep::Rule(r) if r.information() == Information::Ordinal)
                .then(|| instance.ordinal_profile());

        let mut representatives = Vec::with_capacity(instance.num_districts());
        for (d, members) in instance.districts().iter().enumerate() {
            let rep = match &self.in_step {
                InStep::Rule(DirectRule::Optimal) => {
                    let all: Vec<AltId> = (0..instance.num_alternatives()).collect();
                    optimal_among(instance, members, &target.inner, &all)
                }
                InStep::Rule(rule) => {
                    let voters = profile
                        .as_ref()
                        .expect("ordinal profile")
                        .restrict_voters(members);
                    self.apply_ordinal(*rule, &voters, d as u64)?
                }
                InStep::LambdaAcceptable { lambda, inner } => {
                    let g = inner.as_ref().unwrap_or(&target.inner);
                    let acceptable = acceptable_in(instance, members, g, *lambda);
                    extreme_on_line(instance, &acceptable, true)
                }
            };
            representatives.push(rep);
        }

        if representatives.len() == 1 {
            let rep = representatives[0];
            return Ok(MechanismTrace {
                representatives,
                winner: rep,
                candidates: vec![rep],
            });
        }

        let mut distinct_reps = representatives.clone();
        distinct_reps.sort_unstable();
        distinct_reps.dedup();
        let candidates = match (self.selection, self.over_step) {
            (SelectionMode::AllAlternatives, OverStep::Rule(_)) => {
                (0..instance.num_alternatives()).collect()
            }
            _ => distinct_reps,
        };
        let stream = instance.num_districts() as u64;
        let winner = match self.over_step {
            OverStep::Rule(DirectRule::Optimal) => {
                let points: Vec<usize> = representatives
                    .iter()
                    .map(|&a| instance.alt_point(a))
                    .collect();
                optimal_among(instance, &points, &target.outer.as_inner(), &candidates)
            }
            OverStep::Rule(rule) => {
                let mut pseudo = instance.pseudo_profile(&representatives);
                if self.selection == SelectionMode::RepresentativesOnly {
                    pseudo = pseudo.restrict_candidates(&candidates);
                }
                self.apply_ordinal(rule, &pseudo, stream)?
            }
            OverStep::ArbitraryRepresentative => {
                representatives[self.arbitrary.pick(stream, representatives.len())]
            }
            OverStep::LeftmostRepresentative => extreme_on_line(instance, &candidates, false),
        };
        debug_assert!(candidates.contains(&winner));
        Ok(MechanismTrace {
            representatives,
            winner,
            candidates,
        })
    }

    fn apply_ordinal(
        &self,
        rule: DirectRule,
        voters: &OrdinalProfile,
        stream: u64,
    ) -> Result<AltId> {
        match rule {
            DirectRule::Median => median_line_rule(voters),
            DirectRule::PluralityMatching => plurality_matching_rule(voters),
            DirectRule::Dictator(index) => {
                let index = match self.arbitrary {
                    Arbitrary::Lowest => index,
                    seeded => seeded.pick(stream, voters.num_voters().max(1)),
                };
                dictator_rule(voters, index)
            }
            DirectRule::Optimal => unreachable!("optimal rule is cardinal"),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.in_step, self.over_step) {
            (InStep::Rule(DirectRule::Dictator(0)), OverStep::Rule(DirectRule::Median))
                if self.selection == SelectionMode::RepresentativesOnly =>
            {
                f.write_str("arbitrary-median")
            }
            (InStep::Rule(DirectRule::Dictator(0)), OverStep::ArbitraryRepresentative) => {
                f.write_str("arbitrary-dictator")
            }
            (InStep::Rule(r), OverStep::ArbitraryRepresentative) => {
                write!(f, "compose:{r},arbitrary")
            }
            (InStep::Rule(r), OverStep::Rule(o)) => {
                write!(f, "compose:{r},{o}")?;
                if self.selection == SelectionMode::RepresentativesOnly {
                    f.write_str(",reps-only")?;
                }
                Ok(())
            }
            (InStep::LambdaAcceptable { lambda, inner }, _) => {
                write!(f, "arl:{lambda}")?;
                if let Some(g) = inner {
                    write!(f, ",{g}")?;
                }
                Ok(())
            }
            (InStep::Rule(r), OverStep::LeftmostRepresentative) => write!(f, "{r}-leftmost"),
        }
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    /// `compose:<in>,<over>[,reps-only]`, `arl:<lambda>[,<inner>]`,
    /// `arbitrary-median` or `arbitrary-dictator`. `<over>` may also be
    /// `arbitrary` for an α-in-arbitrary-over mechanism.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "arbitrary-median" => return Ok(Mechanism::arbitrary_median()),
            "arbitrary-dictator" => return Ok(Mechanism::arbitrary_dictator()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("compose:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            let (in_rule, over, reps_only) = match parts.as_slice() {
                [i, o] => (i, o, false),
                [i, o, "reps-only"] => (i, o, true),
                _ => return Err(Error::parse(s, "expected compose:<in>,<over>[,reps-only]")),
            };
            let in_rule: DirectRule = in_rule.parse()?;
            if *over == "arbitrary" {
                return Ok(Mechanism::arbitrary_over(in_rule));
            }
            let selection = if reps_only {
                SelectionMode::RepresentativesOnly
            } else {
                SelectionMode::AllAlternatives
            };
            return Ok(Mechanism::compose(in_rule, over.parse()?, selection));
        }
        if let Some(rest) = s.strip_prefix("arl:") {
            let (lambda, inner) = match rest.split_once(',') {
                Some((l, g)) => (l, Some(g.parse::<InnerObjective>()?)),
                None => (rest, None),
            };
            let lambda: f64 = lambda
                .trim()
                .parse()
                .map_err(|_| Error::parse(s, "lambda must be a number"))?;
            return Mechanism::lambda_arl(lambda, inner);
        }
        Err(Error::parse(s, "unknown mechanism"))
    }
}

/// Alternatives whose inner cost for the district is at most `lambda` times
/// the district optimum.
pub fn lambda_acceptable_set(
    instance: &Instance,
    district: DistrictId,
    inner: &InnerObjective,
    lambda: f64,
) -> Result<Vec<AltId>> {
    if !(lambda >= 1.0) {
        return Err(Error::LambdaBelowOne(lambda));
    }
    let members = instance.district(district)?;
    Ok(acceptable_in(instance, members, inner, lambda))
}

fn acceptable_in(
    instance: &Instance,
    members: &[usize],
    inner: &InnerObjective,
    lambda: f64,
) -> Vec<AltId> {
    let values: Vec<f64> = (0..instance.num_alternatives())
        .map(|j| inner_cost_of(instance, members, inner, j))
        .collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    (0..values.len())
        .filter(|&j| leq(values[j], lambda * best))
        .collect()
}

/// Rightmost (or leftmost) alternative on the line; ties go to the lowest index.
fn extreme_on_line(instance: &Instance, alternatives: &[AltId], rightmost: bool) -> AltId {
    let pos = |j: AltId| instance.alternative_position(j).expect("line metric");
    let mut best = alternatives[0];
    for &j in &alternatives[1..] {
        let better = if rightmost {
            pos(j) > pos(best)
        } else {
            pos(j) < pos(best)
        };
        if better || (pos(j) == pos(best) && j < best) {
            best = j;
        }
    }
    best
}

/// Sampled check of the properties λ-ARL needs from a custom inner objective.
fn verify_line_properties(g: &InnerObjective) -> Result<()> {
    const DIMS: usize = 8;
    const SEED: u64 = 0x5eed;
    if !check_monotone(g, DEFAULT_SAMPLES, DIMS, SEED).passed() {
        return Err(Error::PropertyCheckFailed(Property::Monotone.name().into()));
    }
    if !check_subadditive(g, DEFAULT_SAMPLES, DIMS, SEED).passed() {
        return Err(Error::PropertyCheckFailed(
            Property::Subadditive.name().into(),
        ));
    }
    if !check_consistent(g, DEFAULT_SAMPLES, DIMS, SEED).passed() {
        return Err(Error::PropertyCheckFailed(
            Property::Consistent.name().into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let grid: Vec<f64> = (0..=400).map(|t| -1.0 + t as f64 * 0.01).collect();
    for _ in 0..100 {
        let len = rng.gen_range(1..=DIMS);
        let agents: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..2.0)).collect();
        if !single_peaked_on_grid(g, &agents, &grid).passed() {
            return Err(Error::PropertyCheckFailed(
                Property::SinglePeaked.name().into(),
            ));
        }
    }
    Ok(())
}
