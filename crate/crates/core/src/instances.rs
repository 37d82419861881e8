//! Problem instances: agents partitioned into districts, alternatives, and the
//! metric they all live in.
//!
//! Points are indexed agents first, then alternatives: agent `i` is point `i`
//! and alternative `j` is point `n + j`. Every distance query goes through
//! [`Instance::dist`] so the three metric representations behave identically.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type AgentId = usize;
pub type AltId = usize;
pub type DistrictId = usize;

/// Absolute slack for the triangle inequality and ranking consistency on
/// user-supplied floats.
pub const INPUT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// Points on the real line, indexed by agent id and alternative id.
    Line {
        agents: Vec<f64>,
        alternatives: Vec<f64>,
    },
    Euclidean {
        agents: Vec<Vec<f64>>,
        alternatives: Vec<Vec<f64>>,
    },
    /// Full symmetric matrix over the n + m points.
    Explicit { distances: Vec<Vec<f64>> },
}

impl Metric {
    fn dist(&self, n: usize, p: usize, q: usize) -> f64 {
        match self {
            Metric::Line {
                agents,
                alternatives,
            } => {
                let x = if p < n {
                    agents[p]
                } else {
                    alternatives[p - n]
                };
                let y = if q < n {
                    agents[q]
                } else {
                    alternatives[q - n]
                };
                (x - y).abs()
            }
            Metric::Euclidean {
                agents,
                alternatives,
            } => {
                let x = if p < n {
                    &agents[p]
                } else {
                    &alternatives[p - n]
                };
                let y = if q < n {
                    &agents[q]
                } else {
                    &alternatives[q - n]
                };
                x.iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            }
            Metric::Explicit { distances } => distances[p][q],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    num_agents: usize,
    num_alternatives: usize,
    districts: Vec<Vec<AgentId>>,
    metric: Metric,
    declared_rankings: Option<Vec<Vec<AltId>>>,
}

/// Per-agent rankings over alternatives, most preferred first.
///
/// This is all an ordinal rule ever sees. `line_axis` lists alternatives left to
/// right and is only present for line metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalProfile {
    pub rankings: Vec<Vec<AltId>>,
    pub line_axis: Option<Vec<AltId>>,
}

impl OrdinalProfile {
    pub fn num_voters(&self) -> usize {
        self.rankings.len()
    }

    pub fn top(&self, voter: usize) -> AltId {
        self.rankings[voter][0]
    }

    /// Keeps only the listed voters, in the given order.
    pub fn restrict_voters(&self, voters: &[usize]) -> OrdinalProfile {
        OrdinalProfile {
            rankings: voters.iter().map(|&v| self.rankings[v].clone()).collect(),
            line_axis: self.line_axis.clone(),
        }
    }

    /// Removes every alternative outside `candidates` from rankings and axis.
    pub fn restrict_candidates(&self, candidates: &[AltId]) -> OrdinalProfile {
        let keep = |a: &AltId| candidates.contains(a);
        OrdinalProfile {
            rankings: self
                .rankings
                .iter()
                .map(|r| r.iter().copied().filter(keep).collect())
                .collect(),
            line_axis: self
                .line_axis
                .as_ref()
                .map(|axis| axis.iter().copied().filter(keep).collect()),
        }
    }

    /// Position of each alternative along the axis (`None` if off-axis).
    pub fn axis_rank(&self) -> Option<Vec<Option<usize>>> {
        let axis = self.line_axis.as_ref()?;
        let size = axis.iter().copied().max().map_or(0, |m| m + 1);
        let mut rank = vec![None; size];
        for (pos, &a) in axis.iter().enumerate() {
            rank[a] = Some(pos);
        }
        Some(rank)
    }
}

fn sort_by_distance(dists: &[f64], first: Option<AltId>) -> Vec<AltId> {
    let mut order: Vec<AltId> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| {
        dists[a]
            .partial_cmp(&dists[b])
            .unwrap_or(Ordering::Equal)
            .then_with(|| (Some(a) != first).cmp(&(Some(b) != first)))
            .then(a.cmp(&b))
    });
    order
}

impl Instance {
    fn assemble(
        districts: Vec<Vec<AgentId>>,
        num_agents: usize,
        num_alternatives: usize,
        metric: Metric,
    ) -> Result<Self> {
        if districts.is_empty() {
            return Err(Error::NoDistricts);
        }
        if num_alternatives == 0 {
            return Err(Error::NoAlternatives);
        }
        let mut seen = vec![false; num_agents];
        for (d, members) in districts.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyDistrict(d));
            }
            for &i in members {
                if i >= num_agents {
                    return Err(Error::BadPartition(format!(
                        "agent {i} in district {d} does not exist"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::BadPartition(format!("agent {i} appears twice")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::BadPartition(format!("agent {i} has no district")));
        }
        Ok(Instance {
            num_agents,
            num_alternatives,
            districts,
            metric,
            declared_rankings: None,
        })
    }

    /// Line instance from agent positions grouped by district. Agent ids are
    /// assigned in the flattened order.
    pub fn line(
        agent_positions_by_district: &[Vec<f64>],
        alternative_positions: &[f64],
    ) -> Result<Self> {
        if agent_positions_by_district.is_empty() {
            return Err(Error::NoDistricts);
        }
        if let Some(d) = agent_positions_by_district.iter().position(Vec::is_empty) {
            return Err(Error::EmptyDistrict(d));
        }
        if alternative_positions.is_empty() {
            return Err(Error::NoAlternatives);
        }
        let all_finite = agent_positions_by_district
            .iter()
            .flatten()
            .chain(alternative_positions)
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("positions must be finite".into()));
        }
        let (districts, agents) = flatten_groups(agent_positions_by_district);
        let n = agents.len();
        Self::assemble(
            districts,
            n,
            alternative_positions.len(),
            Metric::Line {
                agents,
                alternatives: alternative_positions.to_vec(),
            },
        )
    }

    pub fn euclidean(
        agent_points_by_district: &[Vec<Vec<f64>>],
        alternative_points: &[Vec<f64>],
    ) -> Result<Self> {
        if agent_points_by_district.is_empty() {
            return Err(Error::NoDistricts);
        }
        if let Some(d) = agent_points_by_district.iter().position(Vec::is_empty) {
            return Err(Error::EmptyDistrict(d));
        }
        if alternative_points.is_empty() {
            return Err(Error::NoAlternatives);
        }
        let dim = alternative_points[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "euclidean dimension must be at least 1".into(),
            ));
        }
        let points_ok = agent_points_by_district
            .iter()
            .flatten()
            .chain(alternative_points)
            .all(|p| p.len() == dim && p.iter().all(|x| x.is_finite()));
        if !points_ok {
            return Err(Error::InvalidParameter(format!(
                "every point needs {dim} finite coordinates"
            )));
        }
        let (districts, agents) = flatten_groups(agent_points_by_district);
        let n = agents.len();
        Self::assemble(
            districts,
            n,
            alternative_points.len(),
            Metric::Euclidean {
                agents,
                alternatives: alternative_points.to_vec(),
            },
        )
    }

    /// Explicit metric over agents-then-alternatives. Districts take consecutive
    /// agent ids according to `district_sizes`.
    pub fn explicit(
        distances: Vec<Vec<f64>>,
        district_sizes: &[usize],
        num_alternatives: usize,
    ) -> Result<Self> {
        let n: usize = district_sizes.iter().sum();
        let size = n + num_alternatives;
        validate_matrix(&distances, size)?;
        let mut districts = Vec::with_capacity(district_sizes.len());
        let mut next = 0;
        for &s in district_sizes {
            districts.push((next..next + s).collect());
            next += s;
        }
        Self::explicit_with_districts(distances, districts, num_alternatives)
    }

    pub fn explicit_with_districts(
        distances: Vec<Vec<f64>>,
        districts: Vec<Vec<AgentId>>,
        num_alternatives: usize,
    ) -> Result<Self> {
        let n: usize = districts.iter().map(Vec::len).sum();
        validate_matrix(&distances, n + num_alternatives)?;
        Self::assemble(
            districts,
            n,
            num_alternatives,
            Metric::Explicit { distances },
        )
    }

    /// Attaches declared preference orders. Each must be a permutation of the
    /// alternatives consistent with the distances; they only matter where an
    /// agent is equidistant from several alternatives.
    pub fn with_rankings(mut self, rankings: Vec<Vec<AltId>>) -> Result<Self> {
        if rankings.len() != self.num_agents {
            return Err(Error::InconsistentRanking {
                agent: rankings.len().min(self.num_agents),
                reason: format!(
                    "expected {} rankings, got {}",
                    self.num_agents,
                    rankings.len()
                ),
            });
        }
        for (i, ranking) in rankings.iter().enumerate() {
            let mut seen = vec![false; self.num_alternatives];
            for &j in ranking {
                if j >= self.num_alternatives || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InconsistentRanking {
                        agent: i,
                        reason: "not a permutation of the alternatives".into(),
                    });
                }
            }
            if ranking.len() != self.num_alternatives {
                return Err(Error::InconsistentRanking {
                    agent: i,
                    reason: "not a permutation of the alternatives".into(),
                });
            }
            for pair in ranking.windows(2) {
                if self.agent_alt(i, pair[0]) > self.agent_alt(i, pair[1]) + INPUT_TOLERANCE {
                    return Err(Error::InconsistentRanking {
                        agent: i,
                        reason: format!("alternative {} ranked above closer {}", pair[0], pair[1]),
                    });
                }
            }
        }
        self.declared_rankings = Some(rankings);
        Ok(self)
    }

    pub fn without_rankings(mut self) -> Self {
        self.declared_rankings = None;
        self
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_alternatives(&self) -> usize {
        self.num_alternatives
    }

    pub fn num_districts(&self) -> usize {
        self.districts.len()
    }

    pub fn districts(&self) -> &[Vec<AgentId>] {
        &self.districts
    }

    pub fn district(&self, d: DistrictId) -> Result<&[AgentId]> {
        self.districts
            .get(d)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                what: "district",
                index: d,
                size: self.districts.len(),
            })
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn declared_rankings(&self) -> Option<&[Vec<AltId>]> {
        self.declared_rankings.as_deref()
    }

    pub fn is_line(&self) -> bool {
        matches!(self.metric, Metric::Line { .. })
    }

    pub fn num_points(&self) -> usize {
        self.num_agents + self.num_alternatives
    }

    pub fn alt_point(&self, j: AltId) -> usize {
        self.num_agents + j
    }

    /// Distance between two points (agents first, then alternatives).
    pub fn dist(&self, p: usize, q: usize) -> f64 {
        self.metric.dist(self.num_agents, p, q)
    }

    pub fn agent_alt(&self, i: AgentId, j: AltId) -> f64 {
        self.dist(i, self.alt_point(j))
    }

    pub fn alt_alt(&self, a: AltId, b: AltId) -> f64 {
        self.dist(self.alt_point(a), self.alt_point(b))
    }

    pub fn check_alternative(&self, j: AltId) -> Result<()> {
        if j < self.num_alternatives {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "alternative",
                index: j,
                size: self.num_alternatives,
            })
        }
    }

    /// Line position of a point, if the metric is a line.
    pub fn position(&self, p: usize) -> Option<f64> {
        match &self.metric {
            Metric::Line {
                agents,
                alternatives,
            } => Some(if p < self.num_agents {
                agents[p]
            } else {
                alternatives[p - self.num_agents]
            }),
            _ => None,
        }
    }

    pub fn alternative_position(&self, j: AltId) -> Option<f64> {
        self.position(self.alt_point(j))
    }

    /// Agent positions grouped by district (line metrics only).
    pub fn line_positions_by_district(&self) -> Option<Vec<Vec<f64>>> {
        match &self.metric {
            Metric::Line { agents, .. } => Some(
                self.districts
                    .iter()
                    .map(|d| d.iter().map(|&i| agents[i]).collect())
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Alternatives sorted left to right; ties by index.
    pub fn line_axis(&self) -> Option<Vec<AltId>> {
        let Metric::Line { alternatives, .. } = &self.metric else {
            return None;
        };
        let mut axis: Vec<AltId> = (0..self.num_alternatives).collect();
        axis.sort_by(|&a, &b| {
            alternatives[a]
                .partial_cmp(&alternatives[b])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        Some(axis)
    }

    /// Ranking of alternatives by distance from an arbitrary point; ties by
    /// ascending alternative index.
    pub fn ranking_from_point(&self, p: usize) -> Vec<AltId> {
        let dists: Vec<f64> = (0..self.num_alternatives)
            .map(|j| self.dist(p, self.alt_point(j)))
            .collect();
        sort_by_distance(&dists, None)
    }

    /// Ranking of a pseudo-agent sitting on alternative `a`: `a` itself comes
    /// first among the alternatives at distance zero.
    pub fn ranking_from_alternative(&self, a: AltId) -> Vec<AltId> {
        let dists: Vec<f64> = (0..self.num_alternatives)
            .map(|j| self.alt_alt(a, j))
            .collect();
        sort_by_distance(&dists, Some(a))
    }

    /// Distance-induced rankings of every agent (declared rankings win when
    /// present), plus the line axis for line metrics.
    pub fn ordinal_profile(&self) -> OrdinalProfile {
        let rankings = match &self.declared_rankings {
            Some(r) => r.clone(),
            None => (0..self.num_agents)
                .map(|i| self.ranking_from_point(i))
                .collect(),
        };
        OrdinalProfile {
            rankings,
            line_axis: self.line_axis(),
        }
    }

    /// Profile of pseudo-agents located at the given alternatives.
    pub fn pseudo_profile(&self, located_at: &[AltId]) -> OrdinalProfile {
        OrdinalProfile {
            rankings: located_at
                .iter()
                .map(|&a| self.ranking_from_alternative(a))
                .collect(),
            line_axis: self.line_axis(),
        }
    }

    /// Checks the triangle inequality over all point triples.
    pub fn validate_triangle(&self) -> Result<()> {
        let size = self.num_points();
        for i in 0..size {
            for j in 0..size {
                let dij = self.dist(i, j);
                for x in 0..size {
                    if dij > self.dist(i, x) + self.dist(x, j) + INPUT_TOLERANCE {
                        return Err(Error::TriangleViolation(i, j, x));
                    }
                }
            }
        }
        Ok(())
    }

    /// Full (n+m)×(n+m) distance matrix, agents first.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let size = self.num_points();
        (0..size)
            .map(|p| (0..size).map(|q| self.dist(p, q)).collect())
            .collect()
    }

    pub fn to_file(&self) -> InstanceFile {
        let metric = match &self.metric {
            Metric::Line {
                agents,
                alternatives,
            } => MetricFile::Line {
                agent_positions: self
                    .districts
                    .iter()
                    .map(|d| d.iter().map(|&i| agents[i]).collect())
                    .collect(),
                alternative_positions: alternatives.clone(),
            },
            Metric::Euclidean {
                agents,
                alternatives,
            } => MetricFile::Euclidean {
                agent_points: self
                    .districts
                    .iter()
                    .map(|d| d.iter().map(|&i| agents[i].clone()).collect())
                    .collect(),
                alternative_points: alternatives.clone(),
            },
            Metric::Explicit { distances } => MetricFile::Explicit {
                distances: distances.clone(),
            },
        };
        InstanceFile {
            metric,
            districts: self.districts.clone(),
            alternatives: AlternativesField::Count(self.num_alternatives),
            rankings: self.declared_rankings.clone(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let InstanceFile {
            metric,
            districts,
            alternatives,
            rankings,
        } = file;
        let n: usize = districts.iter().map(Vec::len).sum();
        let instance = match metric {
            MetricFile::Line {
                agent_positions,
                alternative_positions,
            } => {
                check_shape(&districts, agent_positions.iter().map(Vec::len))?;
                if let AlternativesField::Positions(p) = &alternatives {
                    if p != &alternative_positions {
                        return Err(Error::parse(
                            "alternatives",
                            "positions disagree with the metric",
                        ));
                    }
                }
                let mut agents = vec![0.0; n];
                for (d, members) in districts.iter().enumerate() {
                    for (k, &i) in members.iter().enumerate() {
                        if i >= n {
                            return Err(Error::BadPartition(format!("agent {i} does not exist")));
                        }
                        agents[i] = agent_positions[d][k];
                    }
                }
                if agents
                    .iter()
                    .chain(&alternative_positions)
                    .any(|x| !x.is_finite())
                {
                    return Err(Error::InvalidParameter("positions must be finite".into()));
                }
                let m = alternative_positions.len();
                Self::assemble(
                    districts,
                    n,
                    m,
                    Metric::Line {
                        agents,
                        alternatives: alternative_positions,
                    },
                )?
            }
            MetricFile::Euclidean {
                agent_points,
                alternative_points,
            } => {
                check_shape(&districts, agent_points.iter().map(Vec::len))?;
                let dim = alternative_points.first().map_or(0, Vec::len);
                let mut agents = vec![Vec::new(); n];
                for (d, members) in districts.iter().enumerate() {
                    for (k, &i) in members.iter().enumerate() {
                        if i >= n {
                            return Err(Error::BadPartition(format!("agent {i} does not exist")));
                        }
                        agents[i] = agent_points[d][k].clone();
                    }
                }
                let ok = dim > 0
                    && agents
                        .iter()
                        .chain(&alternative_points)
                        .all(|p| p.len() == dim && p.iter().all(|x| x.is_finite()));
                if !ok {
                    return Err(Error::InvalidParameter(
                        "euclidean points need equal, nonzero dimension".into(),
                    ));
                }
                let m = alternative_points.len();
                Self::assemble(
                    districts,
                    n,
                    m,
                    Metric::Euclidean {
                        agents,
                        alternatives: alternative_points,
                    },
                )?
            }
            MetricFile::Explicit { distances } => {
                let m = match alternatives {
                    AlternativesField::Count(m) => m,
                    AlternativesField::Positions(_) => {
                        return Err(Error::parse(
                            "alternatives",
                            "explicit metrics take a count",
                        ))
                    }
                };
                Self::explicit_with_districts(distances, districts, m)?
            }
        };
        if let AlternativesField::Count(m) = alternatives {
            if m != instance.num_alternatives {
                return Err(Error::parse(
                    "alternatives",
                    format!(
                        "count {m} disagrees with the metric ({})",
                        instance.num_alternatives
                    ),
                ));
            }
        }
        match rankings {
            Some(r) => instance.with_rankings(r),
            None => Ok(instance),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::parse("instance json", e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::parse(&path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }
}

fn flatten_groups<T: Clone>(groups: &[Vec<T>]) -> (Vec<Vec<AgentId>>, Vec<T>) {
    let mut districts = Vec::with_capacity(groups.len());
    let mut flat = Vec::new();
    for group in groups {
        districts.push((flat.len()..flat.len() + group.len()).collect());
        flat.extend(group.iter().cloned());
    }
    (districts, flat)
}

fn check_shape(
    districts: &[Vec<AgentId>],
    sizes: impl ExactSizeIterator<Item = usize>,
) -> Result<()> {
    if sizes.len() != districts.len() {
        return Err(Error::parse(
            "metric",
            "agent positions must be grouped like `districts`",
        ));
    }
    for (d, s) in sizes.enumerate() {
        if s != districts[d].len() {
            return Err(Error::parse(
                "metric",
                format!(
                    "district {d} lists {} agents but {s} positions",
                    districts[d].len()
                ),
            ));
        }
    }
    Ok(())
}

fn validate_matrix(distances: &[Vec<f64>], size: usize) -> Result<()> {
    if distances.len() != size || distances.iter().any(|row| row.len() != size) {
        return Err(Error::MalformedMatrix(format!("expected {size}×{size}")));
    }
    for i in 0..size {
        if distances[i][i] != 0.0 {
            return Err(Error::MalformedMatrix(format!("nonzero diagonal at {i}")));
        }
        for j in 0..size {
            let d = distances[i][j];
            if !d.is_finite() || d < 0.0 {
                return Err(Error::NegativeDistance(i, j));
            }
            if (d - distances[j][i]).abs() > INPUT_TOLERANCE {
                return Err(Error::AsymmetricMatrix(i, j));
            }
        }
    }
    for i in 0..size {
        for j in 0..size {
            for x in 0..size {
                if distances[i][j] > distances[i][x] + distances[x][j] + INPUT_TOLERANCE {
                    return Err(Error::TriangleViolation(i, j, x));
                }
            }
        }
    }
    Ok(())
}

/// On-disk instance format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub metric: MetricFile,
    pub districts: Vec<Vec<AgentId>>,
    pub alternatives: AlternativesField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rankings: Option<Vec<Vec<AltId>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricFile {
    Line {
        agent_positions: Vec<Vec<f64>>,
        alternative_positions: Vec<f64>,
    },
    Euclidean {
        agent_points: Vec<Vec<Vec<f64>>>,
        alternative_points: Vec<Vec<f64>>,
    },
    Explicit {
        distances: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlternativesField {
    Count(usize),
    Positions(Vec<f64>),
}
