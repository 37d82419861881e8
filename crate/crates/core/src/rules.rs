//! Direct voting rules. Each maps one voter set to a single alternative and
//! serves either inside a district or over the district representatives.
//!
//! Ordinal rules take an [`OrdinalProfile`] and nothing else, so they cannot
//! read distances. The optimal rule is cardinal and takes the instance.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::instances::{AgentId, AltId, Instance, OrdinalProfile};
use crate::matching::BipartiteGraph;
use crate::objectives::{InnerObjective, OuterObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Information {
    Cardinal,
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectRule {
    /// Minimizes the aggregated voter distance; needs the metric.
    Optimal,
    /// Lower median of the voters' peaks along the line axis.
    Median,
    PluralityMatching,
    /// Top choice of the voter at this position in the voter list.
    Dictator(usize),
}

impl DirectRule {
    pub fn information(self) -> Information {
        match self {
            DirectRule::Optimal => Information::Cardinal,
            _ => Information::Ordinal,
        }
    }

    pub fn needs_line(self) -> bool {
        matches!(self, DirectRule::Median)
    }

    /// Known distortion guarantees as (objective kind, bound). Median's bound
    /// holds when voters sit on alternatives, i.e. over representatives.
    pub fn claimed_distortion(self) -> Vec<(OuterObjective, f64)> {
        match self {
            DirectRule::Optimal => vec![(OuterObjective::Avg, 1.0), (OuterObjective::Max, 1.0)],
            DirectRule::PluralityMatching => {
                vec![(OuterObjective::Avg, 3.0), (OuterObjective::Max, 3.0)]
            }
            DirectRule::Median => vec![(OuterObjective::Avg, 1.0)],
            DirectRule::Dictator(_) => Vec::new(),
        }
    }
}

impl fmt::Display for DirectRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectRule::Optimal => f.write_str("optimal"),
            DirectRule::Median => f.write_str("median"),
            DirectRule::PluralityMatching => f.write_str("plurality-matching"),
            DirectRule::Dictator(0) => f.write_str("dictator"),
            DirectRule::Dictator(i) => write!(f, "dictator:{i}"),
        }
    }
}

impl FromStr for DirectRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "optimal" => Ok(DirectRule::Optimal),
            "median" => Ok(DirectRule::Median),
            "plurality-matching" => Ok(DirectRule::PluralityMatching),
            "dictator" => Ok(DirectRule::Dictator(0)),
            other => {
                let idx = other
                    .strip_prefix("dictator:")
                    .ok_or_else(|| Error::parse(s, "unknown rule"))?;
                idx.parse()
                    .map(DirectRule::Dictator)
                    .map_err(|_| Error::parse(s, "dictator index must be a nonnegative integer"))
            }
        }
    }
}

/// Alternative minimizing `inner` over the voters' distance vector; ties go to
/// the lowest index.
pub fn optimal_rule(
    instance: &Instance,
    voters: &[AgentId],
    inner: &InnerObjective,
) -> Result<AltId> {
    if voters.is_empty() {
        return Err(Error::EmptyVoterSet);
    }
    if let Some(&bad) = voters.iter().find(|&&i| i >= instance.num_agents()) {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: bad,
            size: instance.num_agents(),
        });
    }
    let candidates: Vec<AltId> = (0..instance.num_alternatives()).collect();
    Ok(optimal_among(instance, voters, inner, &candidates))
}

/// Optimal rule over arbitrary voter points (agents or pseudo-agents) and a
/// restricted candidate list, which must be nonempty and sorted ascending.
pub(crate) fn optimal_among(
    instance: &Instance,
    voter_points: &[usize],
    inner: &InnerObjective,
    candidates: &[AltId],
) -> AltId {
    let mut best: Option<(AltId, f64)> = None;
    for &j in candidates {
        let v: Vec<f64> = voter_points
            .iter()
            .map(|&p| instance.dist(p, instance.alt_point(j)))
            .collect();
        let value = inner.apply(&v);
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((j, value));
        }
    }
    best.expect("candidate list is nonempty").0
}

/// Lower median of the voters' top choices along the line axis.
pub fn median_line_rule(profile: &OrdinalProfile) -> Result<AltId> {
    if profile.num_voters() == 0 {
        return Err(Error::EmptyVoterSet);
    }
    let rank = profile.axis_rank().ok_or(Error::MissingAxis)?;
    let mut peaks: Vec<(usize, AltId)> = Vec::with_capacity(profile.num_voters());
    for v in 0..profile.num_voters() {
        let top = profile.top(v);
        let r = rank.get(top).copied().flatten().ok_or(Error::MissingAxis)?;
        peaks.push((r, top));
    }
    peaks.sort_unstable();
    Ok(peaks[peaks.len().div_ceil(2) - 1].1)
}

/// Lowest-indexed alternative `a` such that voters can be perfectly matched to
/// voters with every voter `i` weakly preferring `a` to its partner's top.
pub fn plurality_matching_rule(profile: &OrdinalProfile) -> Result<AltId> {
    let voters = profile.num_voters();
    if voters == 0 {
        return Err(Error::EmptyVoterSet);
    }
    let mut candidates = profile.rankings[0].clone();
    candidates.sort_unstable();
    let size = candidates.last().map_or(0, |&m| m + 1);
    // position[i][a] = rank of a in voter i's ranking
    let position: Vec<Vec<usize>> = profile
        .rankings
        .iter()
        .map(|r| {
            let mut pos = vec![usize::MAX; size];
            for (k, &a) in r.iter().enumerate() {
                pos[a] = k;
            }
            pos
        })
        .collect();
    let tops: Vec<AltId> = (0..voters).map(|v| profile.top(v)).collect();
    for &a in &candidates {
        if domination_graph(&position, &tops, a).has_perfect_matching() {
            return Ok(a);
        }
    }
    Err(Error::InternalNoWinner)
}

fn domination_graph(position: &[Vec<usize>], tops: &[AltId], a: AltId) -> BipartiteGraph {
    let voters = tops.len();
    let mut graph = BipartiteGraph::new(voters, voters);
    for (i, pos) in position.iter().enumerate() {
        for (j, &t) in tops.iter().enumerate() {
            if pos[a] <= pos[t] {
                graph.add_edge(i, j);
            }
        }
    }
    graph
}

/// Top choice of the voter at `dictator_index`.
pub fn dictator_rule(profile: &OrdinalProfile, dictator_index: usize) -> Result<AltId> {
    if profile.num_voters() == 0 {
        return Err(Error::EmptyVoterSet);
    }
    if dictator_index >= profile.num_voters() {
        return Err(Error::IndexOutOfRange {
            what: "dictator",
            index: dictator_index,
            size: profile.num_voters(),
        });
    }
    Ok(profile.top(dictator_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(rankings: &[&[AltId]], axis: Option<&[AltId]>) -> OrdinalProfile {
        OrdinalProfile {
            rankings: rankings.iter().map(|r| r.to_vec()).collect(),
            line_axis: axis.map(<[AltId]>::to_vec),
        }
    }

    #[test]
    fn optimal_by_hand() {
        let inst = Instance::line(&[vec![0.0, 1.0]], &[0.0, 2.0]).unwrap();
        assert_eq!(
            optimal_rule(&inst, &[0, 1], &InnerObjective::Avg).unwrap(),
            0
        );
        let s = 2f64.sqrt();
        let inst = Instance::line(&[vec![2.0 - s]], &[0.0, 2.0]).unwrap();
        assert_eq!(optimal_rule(&inst, &[0], &InnerObjective::Avg).unwrap(), 0);
        let inst = Instance::line(&[vec![5.0, 5.0]], &[0.0, 5.0]).unwrap();
        assert_eq!(
            optimal_rule(&inst, &[0, 1], &InnerObjective::Max).unwrap(),
            1
        );
        assert_eq!(
            optimal_rule(&inst, &[], &InnerObjective::Max),
            Err(Error::EmptyVoterSet)
        );
    }

    #[test]
    fn median_odd_even_and_axis() {
        let axis: &[AltId] = &[0, 1, 2];
        let p = profile(&[&[0, 1, 2], &[1, 0, 2], &[2, 1, 0]], Some(axis));
        assert_eq!(median_line_rule(&p).unwrap(), 1);
        let p = profile(&[&[0, 1], &[1, 0]], Some(&[0, 1]));
        assert_eq!(median_line_rule(&p).unwrap(), 0);
        let p = profile(&[&[0, 1], &[1, 0]], None);
        assert_eq!(median_line_rule(&p), Err(Error::MissingAxis));
    }

    #[test]
    fn median_over_representatives() {
        // representatives at 0, 0, 2 (alternatives 0, 0, 1)
        let inst = Instance::line(&[vec![0.0]], &[0.0, 2.0]).unwrap();
        let p = inst.pseudo_profile(&[0, 0, 1]);
        assert_eq!(median_line_rule(&p).unwrap(), 0);
    }

    #[test]
    fn plurality_matching_small_cases() {
        let p = profile(&[&[1, 0]], None);
        assert_eq!(plurality_matching_rule(&p).unwrap(), 1);
        let p = profile(&[&[2, 0, 1], &[2, 1, 0], &[2, 0, 1]], None);
        assert_eq!(plurality_matching_rule(&p).unwrap(), 2);
        // (a≻b), (a≻b), (b≻a): graph for a matches everyone; b fails
        let p = profile(&[&[0, 1], &[0, 1], &[1, 0]], None);
        assert_eq!(plurality_matching_rule(&p).unwrap(), 0);
        // flipped labels: voters prefer b twice, so b wins even though a is lower
        let p = profile(&[&[1, 0], &[1, 0], &[0, 1]], None);
        assert_eq!(plurality_matching_rule(&p).unwrap(), 1);
    }

    #[test]
    fn dictator_cases() {
        let p = profile(&[&[1, 0]], None);
        assert_eq!(dictator_rule(&p, 0).unwrap(), 1);
        let p = profile(&[&[0, 1], &[0, 1], &[1, 0]], None);
        assert_eq!(dictator_rule(&p, 2).unwrap(), 1);
        assert!(matches!(
            dictator_rule(&p, 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn parse_rules() {
        for s in [
            "optimal",
            "median",
            "plurality-matching",
            "dictator",
            "dictator:3",
        ] {
            assert_eq!(s.parse::<DirectRule>().unwrap().to_string(), s);
        }
        assert!("copeland".parse::<DirectRule>().is_err());
        assert!("dictator:x".parse::<DirectRule>().is_err());
    }
}
