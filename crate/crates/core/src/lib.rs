//! Distortion of two-step district voting mechanisms in metric spaces.
//!
//! Agents and alternatives live in a metric space and agents are partitioned
//! into districts. A mechanism elects one representative per district and
//! then one winner from the representatives' pseudo-votes. Its distortion
//! under a composed objective `F∘G` is the ratio between the winner's cost and
//! the best achievable cost.
//!
//! ```
//! use distributed_distortion::{evaluate, ComposedObjective, Instance, Mechanism};
//!
//! let inst = Instance::line(&[vec![0.0, 0.2], vec![0.9]], &[0.0, 1.0]).unwrap();
//! let mech: Mechanism = "compose:optimal,optimal".parse().unwrap();
//! let report = evaluate(&mech, &inst, &ComposedObjective::avg_avg()).unwrap();
//! assert!(report.ratio <= 3.0);
//! ```

pub mod adversarial;
pub mod bounds;
pub mod distortion;
pub mod error;
pub mod instances;
pub mod matching;
pub mod mechanisms;
pub mod objectives;
pub mod rules;

pub use adversarial::{
    certify_lower_bound, family_by_name, Certification, FamilyInstance, LowerBoundFamily,
};
pub use distortion::{
    evaluate, hill_climb, sweep, EvaluationReport, Generator, MetricKind, RandomInstances,
    SweepResult,
};
pub use error::{Error, Result};
pub use instances::{AgentId, AltId, DistrictId, Instance, Metric, OrdinalProfile};
pub use mechanisms::{Arbitrary, Mechanism, MechanismTrace, SelectionMode};
pub use objectives::{ComposedObjective, InnerObjective, OuterObjective, Property};
pub use rules::{DirectRule, Information};
