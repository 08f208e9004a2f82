//! Deontic rule evaluation on raw attribute values.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{Rule, SeverityAggregation, Value};
use crate::scenario::{ProductOption, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule_id: String,
    pub description: String,
    pub severity: f64,
    /// Raw values of the attributes the rule's predicate reads, in predicate order.
    pub triggering_values: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeonticReport {
    pub option_id: String,
    pub violations: Vec<Violation>,
    pub aggregate_severity: f64,
    pub clean: bool,
}

impl DeonticReport {
    pub fn rule_ids(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.rule_id.clone()).collect()
    }
}

/// Evaluates every rule against `option`, in declaration order.
pub fn evaluate(option: &ProductOption, rules: &[Rule], aggregation: SeverityAggregation) -> DeonticReport {
    let violations: Vec<Violation> = rules
        .iter()
        .filter(|r| r.predicate.eval(&option.values))
        .map(|r| Violation {
            rule_id: r.id.clone(),
            description: r.description.clone(),
            severity: r.severity,
            triggering_values: r
                .predicate
                .attributes()
                .into_iter()
                .filter_map(|a| option.values.get(a).map(|v| (a.to_owned(), v.clone())))
                .collect(),
        })
        .collect();
    let aggregate_severity = match aggregation {
        SeverityAggregation::Sum => violations.iter().map(|v| v.severity).fold(0.0, |a, s| a + s),
        SeverityAggregation::Max => violations.iter().map(|v| v.severity).fold(0.0, f64::max),
    };
    DeonticReport {
        option_id: option.option_id.clone(),
        clean: violations.is_empty(),
        violations,
        aggregate_severity,
    }
}

pub fn is_clean(option: &ProductOption, rules: &[Rule]) -> bool {
    !rules.iter().any(|r| r.predicate.eval(&option.values))
}

pub fn evaluate_round(
    scenario: &Scenario,
    rules: &[Rule],
    aggregation: SeverityAggregation,
) -> BTreeMap<String, DeonticReport> {
    scenario
        .options
        .iter()
        .map(|o| (o.option_id.clone(), evaluate(o, rules, aggregation)))
        .collect()
}

/// Option ids by ascending aggregate severity; ties by higher utility, then id.
pub fn rank_by_severity(
    scenario: &Scenario,
    reports: &BTreeMap<String, DeonticReport>,
    utilities: &BTreeMap<String, f64>,
) -> Vec<String> {
    let mut ids: Vec<&str> = scenario.ids().collect();
    let sev = |id: &str| reports.get(id).map_or(f64::INFINITY, |r| r.aggregate_severity);
    let util = |id: &str| utilities.get(id).copied().unwrap_or(f64::NEG_INFINITY);
    ids.sort_by(|a, b| {
        sev(a)
            .total_cmp(&sev(b))
            .then_with(|| util(b).total_cmp(&util(a)))
            .then_with(|| a.cmp(b))
    });
    ids.into_iter().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigBundle;

    fn clean_option() -> ProductOption {
        let values = [
            ("price", Value::Number(0.6)),
            ("carbon", Value::Number(80.0)),
            ("water", Value::Number(40.0)),
            ("transparency", Value::Number(0.9)),
            ("farmer_income_share", Value::Number(25.0)),
            ("deforestation_risk", Value::Number(0.0)),
            ("shade_cert", Value::Bool(false)),
            ("child_labor_risk", Value::Number(0.0)),
            ("recyclable", Value::Bool(true)),
            ("packaging_type", Value::Level("bag".into())),
            ("taste", Value::Number(80.0)),
            ("freshness", Value::Number(10.0)),
            ("brew_time", Value::Number(4.0)),
            ("decaf_process", Value::Level("none".into())),
            ("vegan_cert", Value::Bool(true)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        ProductOption {
            option_id: "A".into(),
            label: "A".into(),
            values,
        }
    }

    #[test]
    fn child_labor_triggers_r1() {
        let b = ConfigBundle::builtin();
        let mut o = clean_option();
        o.values.insert("child_labor_risk".into(), Value::Number(0.7));
        let r = evaluate(&o, &b.rules, SeverityAggregation::Sum);
        assert_eq!(r.rule_ids(), ["R1"]);
        assert_eq!(r.aggregate_severity, 1.0);
        assert!(!r.clean);
        assert_eq!(
            r.violations[0].triggering_values,
            [("child_labor_risk".to_owned(), Value::Number(0.7))]
        );
    }

    #[test]
    fn clean_option_reports_nothing() {
        let b = ConfigBundle::builtin();
        let r = evaluate(&clean_option(), &b.rules, SeverityAggregation::Sum);
        assert!(r.clean && r.violations.is_empty() && r.aggregate_severity == 0.0);
    }

    #[test]
    fn sum_versus_max() {
        let b = ConfigBundle::builtin();
        let mut o = clean_option();
        o.values.insert("deforestation_risk".into(), Value::Number(0.6));
        o.values.insert("recyclable".into(), Value::Bool(false));
        let sum = evaluate(&o, &b.rules, SeverityAggregation::Sum);
        assert_eq!(sum.rule_ids(), ["R2", "R6"]);
        assert_eq!(sum.aggregate_severity, 0.75);
        assert_eq!(evaluate(&o, &b.rules, SeverityAggregation::Max).aggregate_severity, 0.5);
    }

    #[test]
    fn empty_rule_set_is_always_clean() {
        let mut o = clean_option();
        o.values.insert("child_labor_risk".into(), Value::Number(1.0));
        assert!(evaluate(&o, &[], SeverityAggregation::Sum).clean);
    }

    fn report(id: &str, severity: f64) -> (String, DeonticReport) {
        (
            id.to_owned(),
            DeonticReport {
                option_id: id.to_owned(),
                violations: vec![],
                aggregate_severity: severity,
                clean: severity == 0.0,
            },
        )
    }

    fn scenario(ids: &[&str]) -> Scenario {
        Scenario {
            scenario_id: "S".into(),
            round_index: 1,
            options: ids
                .iter()
                .map(|id| ProductOption {
                    option_id: (*id).into(),
                    ..clean_option()
                })
                .collect(),
        }
    }

    #[test]
    fn ranking() {
        let s = scenario(&["a", "b", "c"]);
        let reports = [report("a", 0.75), report("b", 0.0), report("c", 0.5)].into_iter().collect();
        let utils = [("a", 0.1), ("b", 0.2), ("c", 0.3)]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect();
        assert_eq!(rank_by_severity(&s, &reports, &utils), ["b", "c", "a"]);

        let reports = [report("a", 0.0), report("b", 0.0), report("c", 0.0)].into_iter().collect();
        assert_eq!(rank_by_severity(&s, &reports, &utils), ["c", "b", "a"]);
    }
}
