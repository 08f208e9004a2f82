use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, AttributeSchema};
use super::value::Value;
use crate::error::{Error, Issue, Result};

/// Effect a certification has on one attribute of a certified option.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CertEffect {
    /// Pin the attribute to a value.
    Set(Value),
    /// Raise the attribute to at least this value.
    AtLeast(f64),
    /// Cap the attribute at this value.
    AtMost(f64),
}

impl CertEffect {
    pub fn apply(&self, current: &Value) -> Value {
        match (self, current) {
            (CertEffect::Set(v), _) => v.clone(),
            (CertEffect::AtLeast(min), Value::Number(x)) => Value::Number(x.max(*min)),
            (CertEffect::AtMost(max), Value::Number(x)) => Value::Number(x.min(*max)),
            (_, other) => other.clone(),
        }
    }
}

/// Certification name → attribute effects, applied when scenarios are built.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CertMap {
    pub entries: BTreeMap<String, Vec<(String, CertEffect)>>,
}

impl CertMap {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertFile {
    #[serde(default)]
    certifications: BTreeMap<String, Vec<RawEffect>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEffect {
    attribute: String,
    set: Option<serde_yaml::Value>,
    min: Option<f64>,
    max: Option<f64>,
}

pub fn parse_cert_map(text: &str, schema: &AttributeSchema, origin: &str) -> Result<CertMap> {
    if text.trim().is_empty() {
        return Ok(CertMap::default());
    }
    let file: CertFile = serde_yaml::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_owned(),
        message: e.to_string(),
    })?;
    let mut issues = Vec::new();
    let mut entries = BTreeMap::new();
    for (cert, raw_effects) in file.certifications {
        let mut effects = Vec::new();
        for (i, raw) in raw_effects.into_iter().enumerate() {
            let field = format!("{cert}[{i}]");
            let Some(def) = schema.get(&raw.attribute) else {
                issues.push(Issue::new(
                    field,
                    format!("unknown attribute `{}`", raw.attribute),
                ));
                continue;
            };
            let effect = match (raw.set, raw.min, raw.max) {
                (Some(v), None, None) => {
                    let value = match (&def.kind, v) {
                        (AttributeKind::Boolean, serde_yaml::Value::Bool(b)) => Some(Value::Bool(b)),
                        (AttributeKind::Categorical(_), serde_yaml::Value::String(s)) => {
                            Some(Value::Level(s))
                        }
                        (k, serde_yaml::Value::Number(n)) if k.is_numeric() => {
                            n.as_f64().map(Value::Number)
                        }
                        _ => None,
                    };
                    match value.map(|v| v.check_against(def).map(|_| v)) {
                        Some(Ok(v)) => Some(CertEffect::Set(v)),
                        Some(Err(m)) => {
                            issues.push(Issue::new(field.clone(), m));
                            None
                        }
                        None => {
                            issues.push(Issue::new(
                                field.clone(),
                                format!("`set` value does not match {} attribute `{}`", def.kind, def.name),
                            ));
                            None
                        }
                    }
                }
                (None, Some(b), None) | (None, None, Some(b)) => {
                    if !def.kind.is_numeric() {
                        issues.push(Issue::new(
                            field.clone(),
                            format!("bounds need a numeric attribute, `{}` is {}", def.name, def.kind),
                        ));
                        None
                    } else if let Err(m) = Value::Number(b).check_against(def) {
                        issues.push(Issue::new(field.clone(), m));
                        None
                    } else if raw.min.is_some() {
                        Some(CertEffect::AtLeast(b))
                    } else {
                        Some(CertEffect::AtMost(b))
                    }
                }
                _ => {
                    issues.push(Issue::new(
                        field.clone(),
                        "exactly one of `set`, `min` or `max` is required",
                    ));
                    None
                }
            };
            if let Some(effect) = effect {
                effects.push((raw.attribute, effect));
            }
        }
        entries.insert(cert, effects);
    }
    if issues.is_empty() {
        Ok(CertMap { entries })
    } else {
        Err(Error::invalid(origin, issues))
    }
}

pub fn load_cert_map(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<CertMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cert_map(&text, schema, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::from_json(include_str!("../../../../configs/attribute_schema.json"), "t")
            .unwrap()
    }

    #[test]
    fn shipped_map() {
        let map = parse_cert_map(include_str!("../../../../configs/cert_map.yml"), &schema(), "t")
            .unwrap();
        let ra = &map.entries["rainforest_alliance"];
        assert_eq!(ra[0], ("shade_cert".to_owned(), CertEffect::Set(Value::Bool(true))));
        assert_eq!(ra[1], ("deforestation_risk".to_owned(), CertEffect::AtMost(0.3)));
    }

    #[test]
    fn effects_apply() {
        assert_eq!(CertEffect::AtLeast(20.0).apply(&Value::Number(8.0)), Value::Number(20.0));
        assert_eq!(CertEffect::AtLeast(20.0).apply(&Value::Number(31.0)), Value::Number(31.0));
        assert_eq!(CertEffect::AtMost(0.3).apply(&Value::Number(0.7)), Value::Number(0.3));
    }

    #[test]
    fn rejects_bad_entries() {
        let text = "certifications:\n  x:\n    - attribute: ghost\n      set: true\n    - attribute: shade_cert\n      min: 1\n    - attribute: transparency\n      set: 3\n    - attribute: price\n";
        let err = parse_cert_map(text, &schema(), "t").unwrap_err();
        let fields: Vec<_> = err.issues().iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["x[0]", "x[1]", "x[2]", "x[3]"]);
    }
}
