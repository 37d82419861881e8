//! Experiment runner behind the `distort` binary.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use distributed_distortion::bounds::{upper_bounds, BOUND_TOLERANCE};
use distributed_distortion::distortion::trial_rng;
use distributed_distortion::objectives::{
    check_consistent, check_monotone, check_single_peaked, check_subadditive, CheckOutcome,
};
use distributed_distortion::{
    certify_lower_bound, family_by_name, sweep, ComposedObjective, Error, Generator,
    InnerObjective, Mechanism, MetricKind, Property, RandomInstances,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INCOMPATIBLE: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unparsable spec, malformed file, invalid config.
    Usage(String),
    /// Valid inputs that cannot be combined, e.g. a line-only mechanism on a
    /// Euclidean instance.
    Incompatible(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Incompatible(_) => exit::INCOMPATIBLE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Incompatible(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotLineMetric | Error::IncompatibleRuleMetric { .. } => {
                CliError::Incompatible(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn parse_mechanism(s: &str) -> CliResult<Mechanism> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

pub fn parse_objective(s: &str) -> CliResult<ComposedObjective> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

/// Accepts an inner spec (`avg`, `pmean:2`) or an objective spec
/// (`max.pmean:2`), in which case the inner part is used.
pub fn parse_inner(s: &str) -> CliResult<InnerObjective> {
    if let Ok(obj) = s.parse::<ComposedObjective>() {
        return Ok(obj.inner);
    }
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Random instance generator plus sweep size. Ranges are inclusive and
/// default to the library's generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    #[serde(default = "default_agents")]
    pub agents: (usize, usize),
    #[serde(default = "default_alternatives")]
    pub alternatives: (usize, usize),
    #[serde(default = "default_districts")]
    pub districts: (usize, usize),
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
}

fn default_metric() -> MetricKind {
    RandomInstances::default().metric
}

fn default_agents() -> (usize, usize) {
    RandomInstances::default().agents
}

fn default_alternatives() -> (usize, usize) {
    RandomInstances::default().alternatives
}

fn default_districts() -> (usize, usize) {
    RandomInstances::default().districts
}

fn default_trials() -> usize {
    10_000
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        GeneratorConfig {
            metric: default_metric(),
            agents: default_agents(),
            alternatives: default_alternatives(),
            districts: default_districts(),
            trials: default_trials(),
            seed,
        }
    }

    pub fn instances(&self) -> RandomInstances {
        RandomInstances {
            metric: self.metric,
            agents: self.agents,
            alternatives: self.alternatives,
            districts: self.districts,
            ..RandomInstances::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverride {
    pub mechanism: String,
    pub objective: String,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

/// A `verify-bounds` run: every mechanism × objective pair with a known (or
/// overridden) bound is swept, and certified on every family sharing its
/// objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<String>,
    pub objectives: Vec<String>,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub families: Vec<String>,
    #[serde(default)]
    pub bounds: Vec<BoundOverride>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl ExperimentConfig {
    /// Every registered bound on random line instances, plus the default
    /// lower-bound families.
    pub fn default_with_seed(seed: u64) -> Self {
        let mut mechanisms: Vec<String> = Vec::new();
        let mut objectives: Vec<String> = Vec::new();
        for e in upper_bounds() {
            if !mechanisms.contains(&e.mechanism) {
                mechanisms.push(e.mechanism.clone());
            }
            if !objectives.contains(&e.objective) {
                objectives.push(e.objective.clone());
            }
        }
        ExperimentConfig {
            mechanisms,
            objectives,
            generator: GeneratorConfig::with_seed(seed),
            families: ["max-max:1", "avg-max:10", "max-avg:10", "cardinal-line"]
                .map(String::from)
                .to_vec(),
            bounds: Vec::new(),
            output: None,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.mechanisms.is_empty() {
            return Err(CliError::Usage("config lists no mechanisms".into()));
        }
        if self.objectives.is_empty() {
            return Err(CliError::Usage("config lists no objectives".into()));
        }
        if self.generator.trials == 0 {
            return Err(CliError::Usage("trials must be at least 1".into()));
        }
        Ok(())
    }

    fn bound_for(&self, mechanism: &str, objective: &str) -> Option<f64> {
        let over = self
            .bounds
            .iter()
            .find(|b| {
                same_spec::<Mechanism>(&b.mechanism, mechanism)
                    && same_spec::<ComposedObjective>(&b.objective, objective)
            })
            .map(|b| b.bound);
        over.or_else(|| {
            upper_bounds()
                .into_iter()
                .find(|e| e.mechanism == mechanism && e.objective == objective)
                .map(|e| e.bound)
        })
    }
}

/// Whether `spec` parses to something whose canonical spelling is `canonical`.
fn same_spec<T: std::str::FromStr + ToString>(spec: &str, canonical: &str) -> bool {
    spec.parse::<T>().is_ok_and(|v| v.to_string() == canonical)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub mechanism: String,
    pub objective: String,
    pub trials: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub within_bound: bool,
    pub witness_path: String,
    pub seed: u64,
}

struct Cell {
    mechanism: Mechanism,
    objective: ComposedObjective,
    bound: f64,
}

/// Sweeps and certifications for `config`. Rows come out in config order:
/// mechanisms outer, objectives inner, each cell's sweep row followed by its
/// family rows. Sweep witnesses are written under `witness_dir` when given.
pub fn verify_bounds(
    config: &ExperimentConfig,
    witness_dir: Option<&Path>,
) -> CliResult<Vec<ReportRow>> {
    config.validate()?;
    let mut cells = Vec::new();
    for m in &config.mechanisms {
        let mechanism = parse_mechanism(m)?;
        for o in &config.objectives {
            let objective = parse_objective(o)?;
            // normalize spellings before looking the bound up
            if let Some(bound) = config.bound_for(&mechanism.to_string(), &objective.to_string()) {
                cells.push(Cell {
                    mechanism: mechanism.clone(),
                    objective,
                    bound,
                });
            }
        }
    }
    let families = config
        .families
        .iter()
        .map(|f| family_by_name(f).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;

    let gen = &config.generator;
    let line = matches!(gen.metric, MetricKind::Line);
    let generator = Generator::Random(gen.instances());
    if let Some(dir) = witness_dir {
        fs::create_dir_all(dir)?;
    }

    let per_cell: Vec<CliResult<Vec<ReportRow>>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, cell)| {
            let mut rows = Vec::new();
            let m = cell.mechanism.to_string();
            let o = cell.objective.to_string();
            if line || !cell.mechanism.requires_line() {
                let result = sweep(
                    &cell.mechanism,
                    &cell.objective,
                    &generator,
                    gen.trials,
                    gen.seed,
                )?;
                let witness_path = match witness_dir {
                    Some(dir) => {
                        let path = dir.join(format!("cell-{k:03}.json"));
                        fs::write(&path, result.witness.to_json())?;
                        path.display().to_string()
                    }
                    None => String::new(),
                };
                rows.push(ReportRow {
                    mechanism: m.clone(),
                    objective: o.clone(),
                    trials: result.evaluated,
                    max_ratio: result.max_ratio,
                    bound: cell.bound,
                    within_bound: result.max_ratio <= cell.bound + BOUND_TOLERANCE,
                    witness_path,
                    seed: gen.seed,
                });
            }
            for fam in families.iter().filter(|f| f.objective.to_string() == o) {
                let cert = certify_lower_bound(fam, &cell.mechanism)?;
                rows.push(ReportRow {
                    mechanism: m.clone(),
                    objective: o.clone(),
                    trials: fam.instances.len(),
                    max_ratio: cert.achieved_ratio,
                    bound: cell.bound,
                    within_bound: cert.achieved_ratio <= cell.bound + BOUND_TOLERANCE,
                    witness_path: format!("family:{}", fam.name),
                    seed: gen.seed,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_cell {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_rows(rows: &[ReportRow], format: Format, out: impl Write) -> CliResult<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub inner: String,
    pub property: &'static str,
    pub declared: bool,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<CheckOutcome>,
}

/// Runs all four property checks on `g`. Single-peakedness is checked on the
/// districts of random line instances.
pub fn check_properties(
    g: &InnerObjective,
    samples: usize,
    seed: u64,
) -> CliResult<Vec<PropertyReport>> {
    const DIMS: usize = 4;
    let declared = g.declared_properties();
    let mut out = Vec::new();
    for p in Property::ALL {
        let outcome = match p {
            Property::Monotone => check_monotone(g, samples, DIMS, seed),
            Property::Subadditive => check_subadditive(g, samples, DIMS, seed),
            Property::Consistent => check_consistent(g, samples, DIMS, seed),
            Property::SinglePeaked => single_peaked_on_random_lines(g, samples, seed)?,
        };
        out.push(PropertyReport {
            inner: g.to_string(),
            property: p.name(),
            declared: declared.contains(&p),
            passed: outcome.passed(),
            witness: (!outcome.passed()).then_some(outcome),
        });
    }
    Ok(out)
}

fn single_peaked_on_random_lines(
    g: &InnerObjective,
    samples: usize,
    seed: u64,
) -> CliResult<CheckOutcome> {
    let generator = RandomInstances::default();
    // each instance costs a 1001-point grid scan per district
    for t in 0..(samples / 100).max(1) as u64 {
        let inst = generator.sample(&mut trial_rng(seed, t))?;
        for d in 0..inst.num_districts() {
            let outcome = check_single_peaked(g, &inst, d)?;
            if !outcome.passed() {
                return Ok(outcome);
            }
        }
    }
    Ok(CheckOutcome::Pass)
}
