use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::AttributeSchema;
use crate::error::{Error, Issue, Result};

/// Profile that every weights file must define.
pub const DEFAULT_PROFILE: &str = "default";

/// Utilitarian weights resolved onto attributes and renormalized to sum 1.
///
/// Weights are authored per criterion (`taste_freshness`, `packaging`, ...).
/// A criterion shared by several attributes splits its weight equally among
/// them, so `weights` always sums to 1 over attributes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightConfig {
    pub profile_name: String,
    /// Attribute name → weight.
    pub weights: BTreeMap<String, f64>,
    /// Criterion key → renormalized weight, as authored.
    pub criteria: BTreeMap<String, f64>,
}

impl WeightConfig {
    /// Resolves criterion weights against `schema`. Issues name the offending key.
    pub fn from_criteria(
        profile_name: &str,
        raw: &BTreeMap<String, f64>,
        schema: &AttributeSchema,
    ) -> std::result::Result<Self, Vec<Issue>> {
        let mut issues = Vec::new();
        let field = |k: &str| format!("{profile_name}.{k}");
        for (key, &w) in raw {
            let members: Vec<_> = schema
                .attributes
                .iter()
                .filter(|a| a.weight_key() == key)
                .collect();
            if members.is_empty() {
                issues.push(Issue::new(field(key), format!("unknown criterion `{key}`")));
            } else if let Some(a) = members.iter().find(|a| !a.is_mcda()) {
                issues.push(Issue::new(
                    field(key),
                    format!("attribute `{}` is excluded from scoring", a.name),
                ));
            }
            if !(w.is_finite() && w >= 0.0) {
                issues.push(Issue::new(field(key), format!("weight {w} must be nonnegative")));
            }
        }
        let total: f64 = raw.values().filter(|w| w.is_finite() && **w > 0.0).sum();
        if issues.is_empty() && total <= 0.0 {
            issues.push(Issue::new(profile_name, "at least one weight must be positive"));
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        let criteria: BTreeMap<String, f64> =
            raw.iter().map(|(k, w)| (k.clone(), w / total)).collect();
        let mut weights = BTreeMap::new();
        for attr in schema.mcda_attributes() {
            let key = attr.weight_key();
            let share = schema
                .mcda_attributes()
                .filter(|a| a.weight_key() == key)
                .count() as f64;
            let w = criteria.get(key).copied().unwrap_or(0.0) / share;
            weights.insert(attr.name.clone(), w);
        }
        Ok(WeightConfig {
            profile_name: profile_name.to_owned(),
            weights,
            criteria,
        })
    }

    pub fn weight(&self, attribute: &str) -> f64 {
        self.weights.get(attribute).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    profiles: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn parse_weights(
    text: &str,
    schema: &AttributeSchema,
    origin: &str,
) -> Result<BTreeMap<String, WeightConfig>> {
    let file: WeightsFile = serde_yaml::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_owned(),
        message: e.to_string(),
    })?;
    let mut issues = Vec::new();
    if !file.profiles.contains_key(DEFAULT_PROFILE) {
        issues.push(Issue::new("profiles", "profile `default` is required"));
    }
    let mut out = BTreeMap::new();
    for (name, raw) in &file.profiles {
        match WeightConfig::from_criteria(name, raw, schema) {
            Ok(w) => {
                out.insert(name.clone(), w);
            }
            Err(mut found) => issues.append(&mut found),
        }
    }
    if issues.is_empty() {
        Ok(out)
    } else {
        Err(Error::invalid(origin, issues))
    }
}

pub fn load_weights(
    path: impl AsRef<Path>,
    schema: &AttributeSchema,
) -> Result<BTreeMap<String, WeightConfig>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&text, schema, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::from_json(include_str!("../../../../configs/attribute_schema.json"), "t")
            .unwrap()
    }

    #[test]
    fn shipped_profiles_renormalize() {
        let profiles =
            parse_weights(include_str!("../../../../configs/utilitarian_weights.yml"), &schema(), "t")
                .unwrap();
        let default = &profiles["default"];
        assert_eq!(default.criteria.len(), 8);
        let sum: f64 = default.weights.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((default.weight("taste") - default.weight("freshness")).abs() < 1e-15);
        assert!(profiles.contains_key("alt"));
    }

    #[test]
    fn unnormalized_input_is_rescaled() {
        let text = "profiles:\n  default:\n    price: 2\n    carbon: 6\n";
        let p = parse_weights(text, &schema(), "t").unwrap();
        assert_eq!(p["default"].weight("price"), 0.25);
        assert_eq!(p["default"].weight("carbon"), 0.75);
        assert_eq!(p["default"].weight("water"), 0.0);
    }

    #[test]
    fn excluded_attribute_rejected() {
        let text = "profiles:\n  default:\n    price: 1\n    child_labor_risk: 0.5\n";
        let err = parse_weights(text, &schema(), "t").unwrap_err();
        assert_eq!(err.issues()[0].field, "default.child_labor_risk");
    }

    #[test]
    fn missing_default_and_all_zero() {
        let err = parse_weights("profiles:\n  alt:\n    price: 0\n", &schema(), "t").unwrap_err();
        let fields: Vec<_> = err.issues().iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["profiles", "alt"]);
    }

    #[test]
    fn negative_and_unknown_keys() {
        let text = "profiles:\n  default:\n    price: -1\n    aroma: 1\n";
        let err = parse_weights(text, &schema(), "t").unwrap_err();
        assert_eq!(err.issues().len(), 2);
    }
}
