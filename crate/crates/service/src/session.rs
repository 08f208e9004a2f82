//! One player's game: scenario pool, cursor, budget and picks.
//!
//! Rounds are evaluated once at creation under the welfare weights; those
//! evaluations feed the session summary exactly as an offline replay would.
//! Recommendations use the session's own weights, snapshotted the first time
//! a round is served so a later weight change only reaches unseen rounds.

use std::collections::BTreeMap;

use ethicup_core::config::{Condition, ConfigBundle, Value, WeightConfig, PRICE_ATTRIBUTE};
use ethicup_core::explain::Explainer;
use ethicup_core::harness::{self, affordable_subset, ConditionPolicy, Decision, PolicyChoice, RoundEvaluation};
use ethicup_core::meta::MetaDecision;
use ethicup_core::replay::{session_pool, PlayLogRecord, SessionSummary};
use ethicup_core::scoring::{self, UtilityScore};
use serde::Serialize;

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pick {
    pub round: u32,
    pub option_id: String,
    pub timestamp: String,
    pub recommended_option: String,
    pub followed_recommendation: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    pub condition: Condition,
    weights: WeightConfig,
    rounds: Vec<RoundEvaluation>,
    /// Round → weights in force when it was first served.
    served: BTreeMap<u32, WeightConfig>,
    /// 1-based; `rounds.len() + 1` once every round is picked.
    pub round_cursor: u32,
    pub budget_remaining: f64,
    initial_budget: f64,
    picks: Vec<Pick>,
    decisions: Vec<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub seed: u64,
    pub condition: Condition,
    pub rounds: u32,
    pub round_cursor: u32,
    pub complete: bool,
    pub budget_remaining: f64,
    pub hard_budget: bool,
    /// Criterion → weight, renormalized.
    pub weights: BTreeMap<String, f64>,
    pub picks: Vec<Pick>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationView {
    pub rule_id: String,
    pub description: String,
    pub severity: f64,
    pub triggering_values: BTreeMap<String, Value>,
}

/// Per-option Details panel. Fields a condition does not explain are absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Details {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contributions: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<Vec<ViolationView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub severity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionView {
    pub option_id: String,
    pub label: String,
    pub price: f64,
    pub values: BTreeMap<String, Value>,
    pub affordable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub why: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Details>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub option_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Combined condition only, from here down.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility_best: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switched: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundView {
    pub session_id: String,
    pub condition: Condition,
    pub round: u32,
    pub rounds: u32,
    pub scenario_id: String,
    pub budget_remaining: f64,
    pub options: Vec<OptionView>,
    pub recommendation: Recommendation,
}

/// What the policy sees for one round: the candidate set and its scores.
struct Advice {
    eval: RoundEvaluation,
    scores: BTreeMap<String, UtilityScore>,
    policy: ConditionPolicy,
    choice: PolicyChoice,
}

impl Session {
    /// Seeds the pool and evaluates every round. `weights` defaults to the
    /// profile the condition uses in the batch harness.
    pub fn new(
        id: String,
        seed: u64,
        condition: Condition,
        weights: Option<WeightConfig>,
        bundle: &ConfigBundle,
    ) -> ethicup_core::Result<Self> {
        let pool = session_pool(bundle, seed)?;
        let weights = weights.unwrap_or_else(|| {
            let policy = ConditionPolicy::from_bundle(condition, bundle);
            bundle
                .profile(&policy.weight_profile)
                .expect("profiles are cross-checked at load")
                .clone()
        });
        Ok(Session {
            id,
            seed,
            condition,
            weights,
            rounds: pool.iter().map(|s| RoundEvaluation::new(s, bundle)).collect(),
            served: BTreeMap::new(),
            round_cursor: 1,
            budget_remaining: bundle.experiment.initial_budget,
            initial_budget: bundle.experiment.initial_budget,
            picks: Vec::new(),
            decisions: Vec::new(),
        })
    }

    pub fn rounds(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn is_complete(&self) -> bool {
        self.round_cursor as usize > self.rounds.len()
    }

    pub fn weights(&self) -> &WeightConfig {
        &self.weights
    }

    pub fn picks(&self) -> &[Pick] {
        &self.picks
    }

    pub fn view(&self, hard_budget: bool) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            seed: self.seed,
            condition: self.condition,
            rounds: self.rounds(),
            round_cursor: self.round_cursor,
            complete: self.is_complete(),
            budget_remaining: self.budget_remaining,
            hard_budget,
            weights: self.weights.criteria.clone(),
            picks: self.picks.clone(),
        }
    }

    /// Replaces the weights for every round not yet served. Returns the first
    /// round they apply to.
    pub fn set_weights(&mut self, weights: WeightConfig) -> u32 {
        self.weights = weights;
        let mut first = self.round_cursor;
        while self.served.contains_key(&first) {
            first += 1;
        }
        first
    }

    /// Round `n` must exist and be the current one.
    fn check_round(&self, n: u32) -> Result<(), ApiError> {
        if n == 0 || n > self.rounds() {
            return Err(ApiError::NotFound(format!(
                "round {n} does not exist; session has {} rounds",
                self.rounds()
            )));
        }
        if n != self.round_cursor {
            let msg = if n < self.round_cursor {
                format!("round {n} already has a pick")
            } else {
                format!("round {n} is not open; current round is {}", self.round_cursor)
            };
            return Err(ApiError::Conflict(msg));
        }
        Ok(())
    }

    fn advise(&self, n: u32, bundle: &ConfigBundle, hard_budget: bool) -> Advice {
        let full = &self.rounds[n as usize - 1];
        let weights = self.served.get(&n).unwrap_or(&self.weights);
        let eval = if hard_budget {
            let subset = affordable_subset(&full.scenario, self.budget_remaining);
            if subset.options.len() == full.scenario.options.len() {
                full.clone()
            } else {
                RoundEvaluation::new(&subset, bundle)
            }
        } else {
            full.clone()
        };
        let scores: BTreeMap<String, UtilityScore> = eval
            .normalized
            .iter()
            .map(|(id, f)| (id.clone(), scoring::utility(f, weights, &bundle.schema)))
            .collect();
        let utilities = scores.iter().map(|(id, s)| (id.clone(), s.value)).collect();
        let policy = ConditionPolicy::new(
            self.condition,
            weights.profile_name.clone(),
            bundle.experiment.regret_bound,
        );
        let choice = harness::choose(&policy, &eval.scenario, &utilities, &eval.reports);
        Advice {
            eval,
            scores,
            policy,
            choice,
        }
    }

    /// Payload for the current round. Serving a round fixes its weights.
    pub fn round_view(&mut self, n: u32, bundle: &ConfigBundle, hard_budget: bool) -> Result<RoundView, ApiError> {
        self.check_round(n)?;
        self.served.entry(n).or_insert_with(|| self.weights.clone());
        let advice = self.advise(n, bundle, hard_budget);
        let full = &self.rounds[n as usize - 1];
        let explainer = Explainer::new(&bundle.templates);
        let (deontic, utilitarian) = match self.condition {
            Condition::None => (false, false),
            Condition::Kantian => (true, false),
            Condition::Utilitarian => (false, true),
            Condition::Combined => (true, true),
        };

        let options = full
            .scenario
            .options
            .iter()
            .map(|o| {
                let id = o.option_id.as_str();
                let report = &full.reports[id];
                let score = advice.scores.get(id).filter(|_| utilitarian);
                let mut why = Vec::new();
                if deontic {
                    why.push(explainer.deontic(&o.label, report));
                }
                if let Some(s) = score {
                    why.push(explainer.utility(&o.label, s));
                }
                let details = (deontic || utilitarian).then(|| Details {
                    utility: score.map(|s| s.value),
                    contributions: score.map(|s| s.contributions.clone()),
                    violations: deontic.then(|| {
                        report
                            .violations
                            .iter()
                            .map(|v| ViolationView {
                                rule_id: v.rule_id.clone(),
                                description: v.description.clone(),
                                severity: v.severity,
                                triggering_values: v.triggering_values.iter().cloned().collect(),
                            })
                            .collect()
                    }),
                    severity: deontic.then_some(report.aggregate_severity),
                    clean: deontic.then_some(report.clean),
                });
                OptionView {
                    option_id: o.option_id.clone(),
                    label: o.label.clone(),
                    price: o.number(PRICE_ATTRIBUTE).unwrap_or(0.0),
                    values: o.values.clone(),
                    affordable: advice.eval.scenario.option(id).is_some(),
                    why: (!why.is_empty()).then(|| why.join(" ")),
                    details,
                }
            })
            .collect();

        Ok(RoundView {
            session_id: self.id.clone(),
            condition: self.condition,
            round: n,
            rounds: self.rounds(),
            scenario_id: full.scenario.scenario_id.clone(),
            budget_remaining: self.budget_remaining,
            options,
            recommendation: recommendation(&explainer, &advice, self.condition),
        })
    }

    /// Accepts `option_id` for round `n` and returns the play-log record.
    ///
    /// State changes only after `log` succeeds, so the log and the session
    /// never disagree about which picks were accepted.
    pub fn pick<E>(
        &mut self,
        n: u32,
        option_id: &str,
        bundle: &ConfigBundle,
        hard_budget: bool,
        timestamp: String,
        log: impl FnOnce(&PlayLogRecord) -> Result<(), E>,
    ) -> Result<PlayLogRecord, ApiError>
    where
        E: std::fmt::Display,
    {
        self.check_round(n)?;
        let full = &self.rounds[n as usize - 1];
        if full.scenario.option(option_id).is_none() {
            let ids: Vec<&str> = full.scenario.ids().collect();
            return Err(ApiError::BadRequest {
                message: format!("unknown option `{option_id}` in round {n}"),
                allowed: ids.iter().map(|s| s.to_string()).collect(),
                issues: Vec::new(),
            });
        }
        let advice = self.advise(n, bundle, hard_budget);
        if hard_budget && advice.eval.scenario.option(option_id).is_none() {
            return Err(ApiError::Unprocessable(format!(
                "option `{option_id}` costs more than the remaining budget {}",
                self.budget_remaining
            )));
        }
        let decision = full.decision(self.condition, option_id, false);
        let budget_remaining = self.budget_remaining - decision.price;
        let recommended = advice.choice.chosen;
        let record = PlayLogRecord {
            session_id: self.id.clone(),
            timestamp: timestamp.clone(),
            round: n,
            option_id: option_id.to_owned(),
            condition: self.condition,
            followed_recommendation: recommended == option_id,
            recommended_option: recommended.clone(),
            budget_remaining,
            seed: self.seed,
        };
        log(&record).map_err(|e| ApiError::Internal(format!("play log append failed: {e}")))?;

        self.served.entry(n).or_insert_with(|| self.weights.clone());
        self.budget_remaining = budget_remaining;
        self.picks.push(Pick {
            round: n,
            option_id: option_id.to_owned(),
            timestamp,
            followed_recommendation: record.followed_recommendation,
            recommended_option: recommended,
        });
        self.decisions.push(decision);
        self.round_cursor += 1;
        Ok(record)
    }

    /// Metrics over the rounds picked so far, with the harness formulas.
    pub fn summary(&self) -> SessionSummary {
        let followed: Vec<bool> = self.picks.iter().map(|p| p.followed_recommendation).collect();
        SessionSummary::new(
            &self.id,
            self.condition,
            self.seed,
            self.initial_budget,
            self.decisions.clone(),
            &followed,
        )
    }
}

fn recommendation(explainer: &Explainer<'_>, advice: &Advice, condition: Condition) -> Recommendation {
    let choice = &advice.choice;
    let eval = &advice.eval;
    let label = |id: &str| eval.scenario.option(id).map_or(id.to_owned(), |o| o.label.clone());
    let mut rec = Recommendation {
        option_id: choice.chosen.clone(),
        rationale: None,
        text: None,
        utility_best: None,
        conflict: None,
        switched: None,
        regret: None,
        regret_bound: None,
    };
    match condition {
        Condition::None => {}
        Condition::Kantian => {
            rec.rationale = Some(choice.rationale.to_string());
            rec.text = Some(explainer.deontic(&label(&choice.chosen), &eval.reports[&choice.chosen]));
        }
        Condition::Utilitarian => {
            rec.rationale = Some(choice.rationale.to_string());
            rec.text = Some(explainer.utility(&label(&choice.chosen), &advice.scores[&choice.chosen]));
        }
        Condition::Combined => {
            let rationale = match choice.rationale {
                harness::TraceRationale::Meta(k) => k,
                other => unreachable!("combined policy reported {other}"),
            };
            let rho = advice.policy.regret_bound.unwrap_or(0.0);
            let decision = MetaDecision {
                scenario_id: eval.scenario.scenario_id.clone(),
                utility_best: choice.utility_best.clone(),
                chosen: choice.chosen.clone(),
                switched: choice.switched,
                conflict: choice.conflict,
                regret: choice.regret,
                rationale,
            };
            rec.text = Some(explainer.meta(
                &decision,
                &label(&choice.chosen),
                &label(&choice.utility_best),
                advice.scores[&choice.chosen].value,
                &eval.reports[&choice.utility_best].rule_ids(),
                rho,
            ));
            rec.rationale = Some(rationale.to_string());
            rec.utility_best = Some(choice.utility_best.clone());
            rec.conflict = Some(choice.conflict);
            rec.switched = Some(choice.switched);
            rec.regret = Some(choice.regret);
            rec.regret_bound = Some(rho);
        }
    }
    rec
}
