//! Ethical decision support for everyday product choices.
//!
//! Two symbolic engines judge every option in a round:
//!
//! - [`kantian`] evaluates declarative deontic rules on raw attribute values and
//!   reports violations with severities.
//! - [`scoring`] min–max normalizes attributes within the round and aggregates
//!   them into a signed, weighted welfare score.
//!
//! The [`meta`] explainer arbitrates between them with a regret-bounded switch,
//! [`harness`] runs the four experimental conditions over a scenario pool and
//! writes audit CSVs, and [`replay`] recomputes session metrics from play logs.

pub mod config;
pub mod error;
pub mod explain;
pub mod harness;
pub mod kantian;
pub mod meta;
pub mod numfmt;
pub mod replay;
pub mod scenario;
pub mod scoring;
mod select;

pub use config::{
    AttributeDef, AttributeKind, AttributeSchema, CertEffect, CertMap, Condition, ConfigBundle,
    ConfigPaths, ExperimentConfig, McdaSign, PredicateExpr, Rule, SeverityAggregation, Value,
    WeightConfig,
};
pub use error::{Error, Issue, PredicateError, Result};
pub use harness::{ConditionPolicy, ConditionSummary, Decision, ExperimentResult};
pub use kantian::{DeonticReport, Violation};
pub use meta::{MetaDecision, RationaleKind};
pub use scenario::{ProductOption, Scenario};
pub use scoring::{NormalizedFeatures, UtilityScore};
