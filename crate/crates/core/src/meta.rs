//! Conflict detection and the regret-bounded switch.
//!
//! When the utility-best option of a round breaks a rule, the meta-explainer
//! looks for a clean option whose utility is within `regret_bound` of the
//! round maximum. If one exists the best such option is recommended instead;
//! otherwise the utility-best option is kept.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kantian::DeonticReport;
use crate::scenario::Scenario;
use crate::select::{most_preferred, Candidate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleKind {
    /// The utility-best option is also clean.
    Aligned,
    SwitchedClean,
    KeptDespiteViolation,
}

impl RationaleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RationaleKind::Aligned => "aligned",
            RationaleKind::SwitchedClean => "switched_clean",
            RationaleKind::KeptDespiteViolation => "kept_despite_violation",
        }
    }
}

impl fmt::Display for RationaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaDecision {
    pub scenario_id: String,
    pub utility_best: String,
    pub chosen: String,
    pub switched: bool,
    /// The utility-best option is not clean.
    pub conflict: bool,
    /// `U_max − U(chosen)`.
    pub regret: f64,
    pub rationale: RationaleKind,
}

pub(crate) fn candidates<'a>(
    scenario: &'a Scenario,
    utilities: &'a BTreeMap<String, f64>,
    reports: &'a BTreeMap<String, DeonticReport>,
) -> impl Iterator<Item = (Candidate<'a>, bool)> + 'a {
    scenario.options.iter().map(move |o| {
        let id = o.option_id.as_str();
        let report = reports.get(id);
        (
            Candidate {
                id,
                utility: utilities.get(id).copied().unwrap_or(f64::NEG_INFINITY),
                severity: report.map_or(f64::INFINITY, |r| r.aggregate_severity),
            },
            report.is_some_and(|r| r.clean),
        )
    })
}

/// Applies the regret-bounded switch to one round.
///
/// `utilities` and `reports` must cover every option of `scenario`, and the
/// scenario must be nonempty.
pub fn decide(
    scenario: &Scenario,
    utilities: &BTreeMap<String, f64>,
    reports: &BTreeMap<String, DeonticReport>,
    regret_bound: f64,
) -> MetaDecision {
    let best = most_preferred(candidates(scenario, utilities, reports).map(|(c, _)| c))
        .expect("scenario has at least one option");
    let best_clean = reports.get(best.id).is_some_and(|r| r.clean);
    let decision = |chosen: Candidate<'_>, switched: bool, rationale| MetaDecision {
        scenario_id: scenario.scenario_id.clone(),
        utility_best: best.id.to_owned(),
        chosen: chosen.id.to_owned(),
        switched,
        conflict: !best_clean,
        regret: best.utility - chosen.utility,
        rationale,
    };
    if best_clean {
        return decision(best, false, RationaleKind::Aligned);
    }
    let near_parity_clean = most_preferred(
        candidates(scenario, utilities, reports)
            .filter(|(c, clean)| *clean && best.utility - c.utility <= regret_bound)
            .map(|(c, _)| c),
    );
    match near_parity_clean {
        Some(clean) => decision(clean, true, RationaleKind::SwitchedClean),
        None => decision(best, false, RationaleKind::KeptDespiteViolation),
    }
}

/// Share of decisions where a violating utility-best option was replaced.
pub fn conflict_rate(decisions: &[MetaDecision]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(Error::Empty("conflict rate needs at least one decision"));
    }
    Ok(decisions.iter().filter(|d| d.switched).count() as f64 / decisions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ProductOption;

    fn setup(rows: &[(&str, f64, f64)]) -> (Scenario, BTreeMap<String, f64>, BTreeMap<String, DeonticReport>) {
        let scenario = Scenario {
            scenario_id: "S01".into(),
            round_index: 1,
            options: rows
                .iter()
                .map(|(id, _, _)| ProductOption {
                    option_id: (*id).into(),
                    label: String::new(),
                    values: BTreeMap::new(),
                })
                .collect(),
        };
        let utilities = rows.iter().map(|(id, u, _)| ((*id).to_owned(), *u)).collect();
        let reports = rows
            .iter()
            .map(|(id, _, s)| {
                (
                    (*id).to_owned(),
                    DeonticReport {
                        option_id: (*id).into(),
                        violations: vec![],
                        aggregate_severity: *s,
                        clean: *s == 0.0,
                    },
                )
            })
            .collect();
        (scenario, utilities, reports)
    }

    #[test]
    fn clean_argmax_is_aligned() {
        let (s, u, r) = setup(&[("A", 0.50, 0.0), ("B", 0.40, 1.0)]);
        let d = decide(&s, &u, &r, 0.2);
        assert_eq!((d.chosen.as_str(), d.rationale, d.regret), ("A", RationaleKind::Aligned, 0.0));
        assert!(!d.conflict && !d.switched);
    }

    #[test]
    fn switches_within_bound() {
        let (s, u, r) = setup(&[("A", 0.50, 1.0), ("B", 0.35, 0.0)]);
        let d = decide(&s, &u, &r, 0.2);
        assert_eq!(d.chosen, "B");
        assert_eq!(d.rationale, RationaleKind::SwitchedClean);
        assert!(d.switched && d.conflict);
        assert!((d.regret - 0.15).abs() < 1e-12);
    }

    #[test]
    fn keeps_when_margin_exceeded() {
        let (s, u, r) = setup(&[("A", 0.50, 1.0), ("B", 0.20, 0.0)]);
        let d = decide(&s, &u, &r, 0.2);
        assert_eq!(d.chosen, "A");
        assert_eq!(d.rationale, RationaleKind::KeptDespiteViolation);
        assert_eq!(d.regret, 0.0);
        assert!(d.conflict && !d.switched);
    }

    #[test]
    fn zero_bound_switches_only_on_exact_tie() {
        let (s, u, r) = setup(&[("A", 0.5, 0.5), ("B", 0.5, 0.0)]);
        // The tie is broken towards lower severity, so the clean option is already best.
        assert_eq!(decide(&s, &u, &r, 0.0).rationale, RationaleKind::Aligned);
        let (s, u, r) = setup(&[("A", 0.5, 0.5), ("B", 0.4999, 0.0)]);
        assert_eq!(decide(&s, &u, &r, 0.0).rationale, RationaleKind::KeptDespiteViolation);
    }

    #[test]
    fn picks_highest_utility_clean_option() {
        let (s, u, r) = setup(&[("A", 0.5, 1.0), ("B", 0.35, 0.0), ("C", 0.45, 0.0)]);
        assert_eq!(decide(&s, &u, &r, 0.2).chosen, "C");
    }

    #[test]
    fn rate() {
        let (s, u, r) = setup(&[("A", 0.50, 1.0), ("B", 0.35, 0.0)]);
        let switched = decide(&s, &u, &r, 0.2);
        let kept = decide(&s, &u, &r, 0.1);
        let mut all = vec![switched.clone(), switched];
        all.extend(std::iter::repeat(kept).take(6));
        assert_eq!(conflict_rate(&all).unwrap(), 0.25);
        assert_eq!(conflict_rate(&all[2..]).unwrap(), 0.0);
        assert_eq!(conflict_rate(&all[..2]).unwrap(), 1.0);
        assert!(conflict_rate(&[]).is_err());
    }
}
