use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::predicate::{parse_predicate, PredicateExpr};
use super::schema::AttributeSchema;
use crate::error::{Error, Issue, Result};

/// A deontic rule: when `predicate` holds for an option, the option violates it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub id: String,
    pub description: String,
    pub predicate: PredicateExpr,
    pub severity: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default)]
    rules: Vec<RawRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    #[serde(default)]
    description: String,
    predicate: String,
    severity: f64,
}

/// Parses a rules document. An empty document is an empty rule set.
pub fn parse_rules(text: &str, schema: &AttributeSchema, origin: &str) -> Result<Vec<Rule>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let file: RulesFile = serde_yaml::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_owned(),
        message: e.to_string(),
    })?;
    let mut issues = Vec::new();
    let mut ids = BTreeSet::new();
    let mut rules = Vec::with_capacity(file.rules.len());
    for (i, raw) in file.rules.into_iter().enumerate() {
        let label = if raw.id.is_empty() {
            format!("rules[{i}]")
        } else {
            raw.id.clone()
        };
        if raw.id.is_empty() {
            issues.push(Issue::new(format!("rules[{i}].id"), "rule id must not be empty"));
        } else if !ids.insert(raw.id.clone()) {
            issues.push(Issue::new(
                format!("{label}.id"),
                format!("duplicate rule id `{}`", raw.id),
            ));
        }
        if !(0.0..=1.0).contains(&raw.severity) {
            issues.push(Issue::new(
                format!("{label}.severity"),
                format!("severity {} outside [0, 1]", raw.severity),
            ));
        }
        match parse_predicate(&raw.predicate, schema) {
            Ok(predicate) => rules.push(Rule {
                id: raw.id,
                description: raw.description,
                predicate,
                severity: raw.severity,
            }),
            Err(e) => issues.push(Issue::new(format!("{label}.predicate"), e.to_string())),
        }
    }
    if issues.is_empty() {
        Ok(rules)
    } else {
        Err(Error::invalid(origin, issues))
    }
}

pub fn load_rules(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Vec<Rule>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rules(&text, schema, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::from_json(include_str!("../../../../configs/attribute_schema.json"), "t")
            .unwrap()
    }

    #[test]
    fn shipped_rules_load_in_order() {
        let rules =
            parse_rules(include_str!("../../../../configs/kantian_rules.yml"), &schema(), "t")
                .unwrap();
        let ids: Vec<_> = rules.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["R1", "R2", "R3", "R4", "R5", "R6"]);
        let sev: Vec<_> = rules.iter().map(|r| r.severity).collect();
        assert_eq!(sev, [1.0, 0.5, 0.25, 0.25, 0.5, 0.25]);
    }

    #[test]
    fn severity_out_of_range() {
        let text = "rules:\n  - id: R9\n    predicate: shade_cert\n    severity: 1.5\n";
        let err = parse_rules(text, &schema(), "t").unwrap_err();
        assert_eq!(err.issues()[0].field, "R9.severity");
    }

    #[test]
    fn empty_file_is_empty_rule_set() {
        assert!(parse_rules("", &schema(), "t").unwrap().is_empty());
        assert!(parse_rules("rules: []\n", &schema(), "t").unwrap().is_empty());
    }

    #[test]
    fn predicate_errors_carry_rule_id_and_position() {
        let text = "rules:\n  - id: R7\n    predicate: \"price <\"\n    severity: 0.5\n";
        let err = parse_rules(text, &schema(), "t").unwrap_err();
        let issue = &err.issues()[0];
        assert_eq!(issue.field, "R7.predicate");
        assert!(issue.message.contains("position 7"), "{issue}");
    }

    #[test]
    fn errors_are_listed_in_file_order() {
        let text = "rules:\n  - id: A\n    predicate: nope\n    severity: 2\n  - id: A\n    predicate: shade_cert\n    severity: 0\n";
        let err = parse_rules(text, &schema(), "t").unwrap_err();
        let fields: Vec<_> = err.issues().iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["A.severity", "A.predicate", "A.id"]);
        let again = parse_rules(text, &schema(), "t").unwrap_err();
        assert_eq!(err.issues(), again.issues());
    }
}
