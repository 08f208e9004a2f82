//! Four-condition experiment runner, condition metrics and audit CSVs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Condition, ConfigBundle, WeightConfig, PRICE_ATTRIBUTE};
use crate::error::{Error, Result};
use crate::explain::Explainer;
use crate::kantian::{self, DeonticReport};
use crate::meta::{self, RationaleKind};
use crate::numfmt::fmt_real;
use crate::scenario::{csv_writer, Scenario};
use crate::scoring::{self, NormalizedFeatures, UtilityScore};
use crate::select::{most_preferred, Candidate};

pub const OPTIONS_SCORED_FILE: &str = "options_scored.csv";
pub const CONDITION_SUMMARY_FILE: &str = "condition_summary.csv";
pub const POLICY_TRACE_FILE: &str = "policy_trace_text.csv";

/// Slack allowed when comparing a price against the remaining budget.
const BUDGET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionPolicy {
    pub kind: Condition,
    pub weight_profile: String,
    /// Present only for the combined condition.
    pub regret_bound: Option<f64>,
}

impl ConditionPolicy {
    pub fn new(kind: Condition, weight_profile: impl Into<String>, regret_bound: f64) -> Self {
        ConditionPolicy {
            kind,
            weight_profile: weight_profile.into(),
            regret_bound: (kind == Condition::Combined).then_some(regret_bound),
        }
    }

    /// The policy a bundle prescribes for `kind`.
    pub fn from_bundle(kind: Condition, bundle: &ConfigBundle) -> Self {
        let profile = match kind {
            Condition::None => bundle.experiment.personalized_profile(),
            _ => bundle.experiment.weight_profile.as_str(),
        };
        ConditionPolicy::new(kind, profile, bundle.experiment.regret_bound)
    }
}

/// Why a policy picked its option; the combined condition reports the meta rationale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceRationale {
    UtilityMax,
    CleanBest,
    MinSeverity,
    Meta(RationaleKind),
}

impl fmt::Display for TraceRationale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceRationale::UtilityMax => f.write_str("utility_max"),
            TraceRationale::CleanBest => f.write_str("clean_best"),
            TraceRationale::MinSeverity => f.write_str("min_severity"),
            TraceRationale::Meta(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyChoice {
    pub chosen: String,
    /// Argmax of the policy's own utilities.
    pub utility_best: String,
    pub switched: bool,
    pub conflict: bool,
    /// Policy utility given up relative to `utility_best`.
    pub regret: f64,
    pub rationale: TraceRationale,
}

/// Applies one condition policy to a round.
///
/// `utilities` are scored under the policy's own weight profile.
pub fn choose(
    policy: &ConditionPolicy,
    scenario: &Scenario,
    utilities: &BTreeMap<String, f64>,
    reports: &BTreeMap<String, DeonticReport>,
) -> PolicyChoice {
    let all: Vec<(Candidate<'_>, bool)> = meta::candidates(scenario, utilities, reports).collect();
    let best = most_preferred(all.iter().map(|(c, _)| *c)).expect("scenario has options");
    let pick = |chosen: Candidate<'_>, rationale| PolicyChoice {
        chosen: chosen.id.to_owned(),
        utility_best: best.id.to_owned(),
        switched: false,
        conflict: reports.get(best.id).is_some_and(|r| !r.clean),
        regret: best.utility - chosen.utility,
        rationale,
    };
    match policy.kind {
        Condition::None | Condition::Utilitarian => pick(best, TraceRationale::UtilityMax),
        Condition::Kantian => {
            match most_preferred(all.iter().filter(|(_, clean)| *clean).map(|(c, _)| *c)) {
                Some(clean) => pick(clean, TraceRationale::CleanBest),
                None => {
                    let least = all
                        .iter()
                        .map(|(c, _)| *c)
                        .min_by(|a, b| {
                            a.severity
                                .total_cmp(&b.severity)
                                .then_with(|| b.utility.total_cmp(&a.utility))
                                .then_with(|| a.id.cmp(b.id))
                        })
                        .expect("scenario has options");
                    pick(least, TraceRationale::MinSeverity)
                }
            }
        }
        Condition::Combined => {
            let d = meta::decide(scenario, utilities, reports, policy.regret_bound.unwrap_or(0.0));
            PolicyChoice {
                chosen: d.chosen,
                utility_best: d.utility_best,
                switched: d.switched,
                conflict: d.conflict,
                regret: d.regret,
                rationale: TraceRationale::Meta(d.rationale),
            }
        }
    }
}

/// Everything the engines compute for one round under the welfare weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundEvaluation {
    pub scenario: Scenario,
    pub normalized: BTreeMap<String, NormalizedFeatures>,
    pub welfare: BTreeMap<String, UtilityScore>,
    pub reports: BTreeMap<String, DeonticReport>,
    /// Cheapest option of the round.
    pub baseline: String,
}

impl RoundEvaluation {
    pub fn new(scenario: &Scenario, bundle: &ConfigBundle) -> Self {
        let normalized = scoring::normalize_round(scenario, &bundle.schema);
        let weights = bundle.welfare_weights();
        let welfare = normalized
            .iter()
            .map(|(id, f)| (id.clone(), scoring::utility(f, weights, &bundle.schema)))
            .collect();
        RoundEvaluation {
            scenario: scenario.clone(),
            normalized,
            welfare,
            reports: kantian::evaluate_round(
                scenario,
                &bundle.rules,
                bundle.experiment.severity_aggregation,
            ),
            baseline: scoring::price_baseline_choice(scenario)
                .expect("scenario has options")
                .to_owned(),
        }
    }

    pub fn welfare_values(&self) -> BTreeMap<String, f64> {
        self.welfare.iter().map(|(k, u)| (k.clone(), u.value)).collect()
    }

    /// Utilities of this round under an arbitrary profile.
    pub fn utilities_for(&self, weights: &WeightConfig, bundle: &ConfigBundle) -> BTreeMap<String, f64> {
        if weights == bundle.welfare_weights() {
            return self.welfare_values();
        }
        self.normalized
            .iter()
            .map(|(id, f)| (id.clone(), scoring::utility(f, weights, &bundle.schema).value))
            .collect()
    }

    /// Outcome record for picking `chosen` in this round.
    pub fn decision(&self, condition: Condition, chosen: &str, switched: bool) -> Decision {
        let utility = self.welfare.get(chosen).map_or(f64::NAN, |u| u.value);
        let baseline_utility = self.welfare[&self.baseline].value;
        let report = self.reports.get(chosen);
        Decision {
            scenario_id: self.scenario.scenario_id.clone(),
            condition,
            chosen: chosen.to_owned(),
            utility,
            baseline_utility,
            welfare_uplift: utility - baseline_utility,
            clean: report.is_some_and(|r| r.clean),
            severity: report.map_or(0.0, |r| r.aggregate_severity),
            switched,
            price: self
                .scenario
                .option(chosen)
                .and_then(|o| o.number(PRICE_ATTRIBUTE))
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub scenario_id: String,
    pub condition: Condition,
    pub chosen: String,
    /// Welfare utility of the chosen option.
    pub utility: f64,
    /// Welfare utility of the round's cheapest option.
    pub baseline_utility: f64,
    pub welfare_uplift: f64,
    pub clean: bool,
    pub severity: f64,
    pub switched: bool,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub mean_welfare_uplift: f64,
    pub violation_free_share: f64,
    pub mean_severity: f64,
    /// Combined condition only.
    pub conflict_resolved_share: Option<f64>,
    pub total_spend: f64,
}

impl ConditionSummary {
    pub fn from_decisions(condition: Condition, decisions: &[Decision]) -> Result<Self> {
        if decisions.is_empty() {
            return Err(Error::Empty("condition summary needs at least one decision"));
        }
        let n = decisions.len() as f64;
        let mean = |f: fn(&Decision) -> f64| decisions.iter().map(f).sum::<f64>() / n;
        Ok(ConditionSummary {
            condition,
            mean_welfare_uplift: mean(|d| d.welfare_uplift),
            violation_free_share: mean(|d| if d.clean { 1.0 } else { 0.0 }),
            mean_severity: mean(|d| d.severity),
            conflict_resolved_share: (condition == Condition::Combined)
                .then(|| mean(|d| if d.switched { 1.0 } else { 0.0 })),
            total_spend: decisions.iter().map(|d| d.price).sum(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub scenario_id: String,
    pub condition: Condition,
    pub utility_best: String,
    pub chosen: String,
    pub switched: bool,
    pub regret: f64,
    pub rationale: TraceRationale,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    /// Condition-major, in configured condition order.
    pub decisions: Vec<Decision>,
    pub summaries: Vec<ConditionSummary>,
    pub traces: Vec<TraceRow>,
    /// Full-round evaluations, one per scenario.
    pub rounds: Vec<RoundEvaluation>,
}

impl ExperimentResult {
    pub fn summary(&self, condition: Condition) -> Option<&ConditionSummary> {
        self.summaries.iter().find(|s| s.condition == condition)
    }

    pub fn decisions_for(&self, condition: Condition) -> impl Iterator<Item = &Decision> {
        self.decisions.iter().filter(move |d| d.condition == condition)
    }
}

fn trace_text(
    explainer: &Explainer<'_>,
    eval: &RoundEvaluation,
    policy: &ConditionPolicy,
    choice: &PolicyChoice,
    policy_utilities: &BTreeMap<String, f64>,
) -> String {
    let label = |id: &str| eval.scenario.option(id).map_or(id.to_owned(), |o| o.label.clone());
    let chosen_label = label(&choice.chosen);
    match (policy.kind, choice.rationale) {
        (_, TraceRationale::Meta(_)) => {
            let d = meta::MetaDecision {
                scenario_id: eval.scenario.scenario_id.clone(),
                utility_best: choice.utility_best.clone(),
                chosen: choice.chosen.clone(),
                switched: choice.switched,
                conflict: choice.conflict,
                regret: choice.regret,
                rationale: match choice.rationale {
                    TraceRationale::Meta(k) => k,
                    _ => unreachable!(),
                },
            };
            explainer.meta(
                &d,
                &chosen_label,
                &label(&choice.utility_best),
                policy_utilities[&choice.chosen],
                &eval.reports[&choice.utility_best].rule_ids(),
                policy.regret_bound.unwrap_or(0.0),
            )
        }
        (Condition::Kantian, _) => explainer.deontic(&chosen_label, &eval.reports[&choice.chosen]),
        _ => explainer.utility(&chosen_label, &eval.welfare[&choice.chosen]),
    }
}

/// Options priced within `remaining`; the cheapest option alone when none is.
pub fn affordable_subset(scenario: &Scenario, remaining: f64) -> Scenario {
    let price = |o: &crate::scenario::ProductOption| o.number(PRICE_ATTRIBUTE).unwrap_or(0.0);
    let mut options: Vec<_> = scenario
        .options
        .iter()
        .filter(|o| price(o) <= remaining + BUDGET_EPS)
        .cloned()
        .collect();
    if options.is_empty() {
        let cheapest = scoring::price_baseline_choice(scenario).expect("scenario has options");
        options.extend(scenario.option(cheapest).cloned());
    }
    Scenario {
        options,
        ..scenario.clone()
    }
}

/// Runs every configured condition over `pool`.
pub fn run_experiment(pool: &[Scenario], bundle: &ConfigBundle) -> Result<ExperimentResult> {
    if pool.is_empty() {
        return Err(Error::Empty("scenario pool"));
    }
    let experiment = &bundle.experiment;
    let explainer = Explainer::new(&bundle.templates);
    let rounds: Vec<RoundEvaluation> = pool.iter().map(|s| RoundEvaluation::new(s, bundle)).collect();

    let mut decisions = Vec::new();
    let mut summaries = Vec::new();
    let mut traces = Vec::new();
    for &kind in &experiment.conditions {
        let policy = ConditionPolicy::from_bundle(kind, bundle);
        let weights = bundle
            .profile(&policy.weight_profile)
            .expect("profiles are cross-checked at load");
        let mut remaining = experiment.initial_budget;
        let mut made = Vec::with_capacity(rounds.len());
        for full in &rounds {
            let filtered;
            let eval = if experiment.hard_budget {
                let subset = affordable_subset(&full.scenario, remaining);
                if subset.options.len() == full.scenario.options.len() {
                    full
                } else {
                    filtered = RoundEvaluation::new(&subset, bundle);
                    &filtered
                }
            } else {
                full
            };
            let utilities = eval.utilities_for(weights, bundle);
            let choice = choose(&policy, &eval.scenario, &utilities, &eval.reports);
            let decision = eval.decision(kind, &choice.chosen, choice.switched);
            remaining -= decision.price;
            traces.push(TraceRow {
                scenario_id: eval.scenario.scenario_id.clone(),
                condition: kind,
                utility_best: choice.utility_best.clone(),
                chosen: choice.chosen.clone(),
                switched: choice.switched,
                regret: choice.regret,
                rationale: choice.rationale,
                text: trace_text(&explainer, eval, &policy, &choice, &utilities),
            });
            made.push(decision);
        }
        summaries.push(ConditionSummary::from_decisions(kind, &made)?);
        decisions.extend(made);
    }
    Ok(ExperimentResult {
        decisions,
        summaries,
        traces,
        rounds,
    })
}

pub fn write_options_scored<W: std::io::Write>(result: &ExperimentResult, bundle: &ConfigBundle, out: W) -> Result<()> {
    let schema = &bundle.schema;
    let mcda: Vec<&str> = schema.mcda_attributes().map(|a| a.name.as_str()).collect();
    let mut header: Vec<String> = ["scenario_id", "round", "option_id", "label"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(schema.names().map(str::to_owned));
    header.extend(mcda.iter().map(|a| format!("norm_{a}")));
    header.extend(mcda.iter().map(|a| format!("contrib_{a}")));
    header.extend(["utility", "violations", "severity", "clean"].map(String::from));

    let mut w = csv_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        origin: OPTIONS_SCORED_FILE.into(),
        message: e.to_string(),
    };
    w.write_record(&header).map_err(csv_err)?;
    for round in &result.rounds {
        for o in &round.scenario.options {
            let id = &o.option_id;
            let mut row = vec![
                round.scenario.scenario_id.clone(),
                round.scenario.round_index.to_string(),
                id.clone(),
                o.label.clone(),
            ];
            row.extend(schema.names().map(|n| o.values.get(n).map(ToString::to_string).unwrap_or_default()));
            let norm = &round.normalized[id];
            row.extend(mcda.iter().map(|a| fmt_real(norm.get(a).unwrap_or(0.0))));
            let score = &round.welfare[id];
            row.extend(mcda.iter().map(|a| fmt_real(score.contributions[*a])));
            let report = &round.reports[id];
            row.push(fmt_real(score.value));
            row.push(report.rule_ids().join(";"));
            row.push(fmt_real(report.aggregate_severity));
            row.push(report.clean.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(OPTIONS_SCORED_FILE, e))
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "condition",
    "mean_welfare_uplift",
    "violation_free_share",
    "mean_severity",
    "conflict_resolved_share",
    "total_spend",
];

fn summary_cells(s: &ConditionSummary) -> [String; 6] {
    [
        s.condition.to_string(),
        fmt_real(s.mean_welfare_uplift),
        fmt_real(s.violation_free_share),
        fmt_real(s.mean_severity),
        s.conflict_resolved_share.map(fmt_real).unwrap_or_default(),
        fmt_real(s.total_spend),
    ]
}

pub fn write_condition_summary<W: std::io::Write>(summaries: &[ConditionSummary], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        origin: CONDITION_SUMMARY_FILE.into(),
        message: e.to_string(),
    };
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err)?;
    for s in summaries {
        w.write_record(summary_cells(s)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(CONDITION_SUMMARY_FILE, e))
}

pub fn write_policy_trace<W: std::io::Write>(traces: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        origin: POLICY_TRACE_FILE.into(),
        message: e.to_string(),
    };
    w.write_record([
        "scenario_id",
        "condition",
        "utility_best",
        "chosen",
        "switched",
        "regret",
        "rationale",
        "text",
    ])
    .map_err(csv_err)?;
    for t in traces {
        w.write_record([
            t.scenario_id.clone(),
            t.condition.to_string(),
            t.utility_best.clone(),
            t.chosen.clone(),
            t.switched.to_string(),
            fmt_real(t.regret),
            t.rationale.to_string(),
            t.text.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(POLICY_TRACE_FILE, e))
}

/// Writes the three audit CSVs into `dir` and returns their paths.
pub fn write_outputs(result: &ExperimentResult, bundle: &ConfigBundle, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> Result<()>| -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = dir.join(name);
        std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    emit(OPTIONS_SCORED_FILE, &|b| write_options_scored(result, bundle, b))?;
    emit(CONDITION_SUMMARY_FILE, &|b| write_condition_summary(&result.summaries, b))?;
    emit(POLICY_TRACE_FILE, &|b| write_policy_trace(&result.traces, b))?;
    Ok(written)
}

/// Plain-text table of the summaries; cells are identical to the CSV cells.
pub fn format_summary_table(summaries: &[ConditionSummary]) -> String {
    let rows: Vec<[String; 6]> = summaries
        .iter()
        .map(|s| {
            let mut cells = summary_cells(s);
            if cells[4].is_empty() {
                cells[4] = "-".into();
            }
            cells
        })
        .collect();
    let mut widths: Vec<usize> = SUMMARY_COLUMNS.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[&str], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(&SUMMARY_COLUMNS, &mut out);
    for row in &rows {
        line(&row.each_ref().map(String::as_str), &mut out);
    }
    out
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

    fn all_choices(rows: &[(&str, f64, f64)], rho: f64) -> [String; 4] {
        let (s, u, r) = setup(rows);
        Condition::ALL.map(|c| choose(&ConditionPolicy::new(c, "default", rho), &s, &u, &r).chosen)
    }

    #[test]
    fn aligned_round_agrees_everywhere() {
        assert_eq!(
            all_choices(&[("A", 0.6, 0.0), ("B", 0.3, 0.5), ("C", 0.1, 0.0)], 0.2),
            ["A", "A", "A", "A"]
        );
    }

    #[test]
    fn conflict_round_splits_policies() {
        assert_eq!(
            all_choices(&[("A", 0.5, 1.0), ("B", 0.35, 0.0), ("C", 0.1, 0.0)], 0.2),
            ["A", "B", "A", "B"]
        );
    }

    #[test]
    fn kantian_falls_back_to_least_severe() {
        let (s, u, r) = setup(&[("A", 0.5, 0.75), ("B", 0.1, 0.25), ("C", 0.3, 0.5)]);
        let c = choose(&ConditionPolicy::new(Condition::Kantian, "default", 0.2), &s, &u, &r);
        assert_eq!(c.chosen, "B");
        assert_eq!(c.rationale, TraceRationale::MinSeverity);
    }

    #[test]
    fn regret_bound_only_on_combined() {
        assert_eq!(ConditionPolicy::new(Condition::Kantian, "p", 0.2).regret_bound, None);
        assert_eq!(ConditionPolicy::new(Condition::Combined, "p", 0.2).regret_bound, Some(0.2));
    }

    #[test]
    fn empty_pool_is_an_error() {
        let b = ConfigBundle::builtin();
        assert!(matches!(run_experiment(&[], &b), Err(Error::Empty(_))));
    }

    #[test]
    fn summary_means() {
        let d = |uplift: f64, clean: bool, severity: f64, switched: bool| Decision {
            scenario_id: "S".into(),
            condition: Condition::Combined,
            chosen: "A".into(),
            utility: uplift,
            baseline_utility: 0.0,
            welfare_uplift: uplift,
            clean,
            severity,
            switched,
            price: 0.5,
        };
        let s = ConditionSummary::from_decisions(
            Condition::Combined,
            &[d(0.5, true, 0.0, true), d(0.3, false, 1.75, false), d(0.1, true, 0.0, false), d(0.3, false, 0.25, false)],
        )
        .unwrap();
        assert!((s.mean_welfare_uplift - 0.3).abs() < 1e-12);
        assert_eq!(s.violation_free_share, 0.5);
        assert_eq!(s.mean_severity, 0.5);
        assert_eq!(s.conflict_resolved_share, Some(0.25));
        assert_eq!(s.total_spend, 2.0);
    }
}
