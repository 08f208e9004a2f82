use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};

/// One of the four decision policies compared by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// No explanation: argmax of the agent's personalized utility.
    None,
    Kantian,
    Utilitarian,
    /// Combined engines arbitrated by the meta-explainer.
    Combined,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::None,
        Condition::Kantian,
        Condition::Utilitarian,
        Condition::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::None => "none",
            Condition::Kantian => "kantian",
            Condition::Utilitarian => "utilitarian",
            Condition::Combined => "combined",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition `{s}`; expected one of none, kantian, utilitarian, combined"))
    }
}

/// How per-rule severities combine into an option's aggregate severity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityAggregation {
    #[default]
    Sum,
    Max,
}

fn default_rounds() -> u32 {
    6
}
fn default_options() -> u32 {
    3
}
fn default_regret() -> f64 {
    0.2
}
fn default_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}
fn default_profile() -> String {
    super::weights::DEFAULT_PROFILE.to_owned()
}
fn default_cert_rate() -> f64 {
    0.25
}
fn default_budget() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_options")]
    pub options_per_round: u32,
    pub seed: u64,
    #[serde(default = "default_regret")]
    pub regret_bound: f64,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default = "default_profile")]
    pub weight_profile: String,
    #[serde(default)]
    pub severity_aggregation: SeverityAggregation,
    /// Profile behind the no-explanation agent; defaults to `weight_profile`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub personalized_profile: Option<String>,
    /// Share of generated options that receive a certification.
    #[serde(default = "default_cert_rate")]
    pub cert_rate: f64,
    /// Session budget in the price attribute's unit.
    #[serde(default = "default_budget")]
    pub initial_budget: f64,
    /// Drop unaffordable options before scoring.
    #[serde(default)]
    pub hard_budget: bool,
}

impl ExperimentConfig {
    pub fn from_yaml(text: &str, origin: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_yaml::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_owned(),
            message: e.to_string(),
        })?;
        config.validate(origin)?;
        Ok(config)
    }

    pub fn personalized_profile(&self) -> &str {
        self.personalized_profile.as_deref().unwrap_or(&self.weight_profile)
    }

    pub fn validate(&self, origin: &str) -> Result<()> {
        let mut issues = Vec::new();
        if self.rounds < 1 {
            issues.push(Issue::new("rounds", "must be at least 1"));
        }
        if self.options_per_round < 2 {
            issues.push(Issue::new("options_per_round", "must be at least 2"));
        }
        if !(self.regret_bound >= 0.0) {
            issues.push(Issue::new("regret_bound", "must be nonnegative"));
        }
        if self.conditions.is_empty() {
            issues.push(Issue::new("conditions", "at least one condition is required"));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].contains(c) {
                issues.push(Issue::new("conditions", format!("duplicate condition `{c}`")));
            }
        }
        if !(0.0..=1.0).contains(&self.cert_rate) {
            issues.push(Issue::new("cert_rate", "must lie in [0, 1]"));
        }
        if !(self.initial_budget.is_finite() && self.initial_budget >= 0.0) {
            issues.push(Issue::new("initial_budget", "must be nonnegative"));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(origin, issues))
        }
    }
}

pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_yaml(&text, &path.display().to_string())
}
