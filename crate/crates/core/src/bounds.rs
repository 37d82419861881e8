//! Registry of proven distortion upper bounds for the shipped mechanisms.

use crate::distortion::MetricKind;
use crate::mechanisms::Mechanism;
use crate::objectives::ComposedObjective;

/// Slack allowed when comparing an empirical ratio against a bound.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    /// Short human name, e.g. `1-in-1-over`.
    pub name: String,
    /// Mechanism spec string (see [`Mechanism`]'s `FromStr`).
    pub mechanism: String,
    /// Objective spec string, e.g. `max.avg`.
    pub objective: String,
    pub bound: f64,
    /// The bound is only claimed on line metrics.
    pub line_only: bool,
}

impl BoundEntry {
    fn new(name: &str, mechanism: &str, objective: &str, bound: f64, line_only: bool) -> Self {
        BoundEntry {
            name: name.to_string(),
            mechanism: mechanism.to_string(),
            objective: objective.to_string(),
            bound,
            line_only,
        }
    }

    pub fn holds(&self, ratio: f64) -> bool {
        ratio <= self.bound + BOUND_TOLERANCE
    }

    /// Whether sweeping this entry on `metric` is meaningful.
    pub fn applies_to(&self, metric: &MetricKind) -> bool {
        !self.line_only || matches!(metric, MetricKind::Line)
    }
}

/// `max{2 + 1/λ, λ}`.
pub fn lambda_arl_bound(lambda: f64) -> f64 {
    (2.0 + 1.0 / lambda).max(lambda)
}

/// λ values checked by default; `1 + √2` balances both terms.
pub fn default_lambdas() -> [f64; 4] {
    [1.0, 2.0, 1.0 + std::f64::consts::SQRT_2, 4.0]
}

/// Every upper-bound entry the library implements.
pub fn upper_bounds() -> Vec<BoundEntry> {
    let objectives: Vec<String> = ComposedObjective::canonical()
        .iter()
        .map(ToString::to_string)
        .collect();
    let mut out = Vec::new();
    for obj in &objectives {
        out.push(BoundEntry::new(
            "1-in-1-over",
            "compose:optimal,optimal",
            obj,
            3.0,
            false,
        ));
    }
    for obj in &objectives {
        out.push(BoundEntry::new(
            "pm-in-pm-over",
            "compose:plurality-matching,plurality-matching",
            obj,
            11.0,
            false,
        ));
    }
    for obj in ["max.avg", "max.max"] {
        out.push(BoundEntry::new(
            "pm-in-arbitrary-over",
            "compose:plurality-matching,arbitrary",
            obj,
            5.0,
            false,
        ));
    }
    for obj in ["avg.avg", "avg.max"] {
        out.push(BoundEntry::new(
            "pm-in-median-over",
            "compose:plurality-matching,median",
            obj,
            7.0,
            true,
        ));
    }
    out.push(BoundEntry::new(
        "arbitrary-median",
        "arbitrary-median",
        "avg.max",
        5.0,
        true,
    ));
    out.push(BoundEntry::new(
        "arbitrary-dictator",
        "arbitrary-dictator",
        "max.max",
        3.0,
        true,
    ));
    for lambda in default_lambdas() {
        for inner in ["avg", "max", "pmean:2"] {
            out.push(BoundEntry::new(
                "lambda-arl",
                &format!("arl:{lambda}"),
                &format!("max.{inner}"),
                lambda_arl_bound(lambda),
                true,
            ));
        }
    }
    for obj in &objectives {
        out.push(BoundEntry::new(
            "reps-only-1-in-1-over",
            "compose:optimal,optimal,reps-only",
            obj,
            5.0,
            false,
        ));
    }
    out
}

/// Registered bound for a mechanism/objective pair, if any.
pub fn lookup(mechanism: &Mechanism, objective: &ComposedObjective) -> Option<BoundEntry> {
    let m = mechanism.to_string();
    let o = objective.to_string();
    upper_bounds()
        .into_iter()
        .find(|e| e.mechanism == m && e.objective == o)
}
