use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};

/// Attribute carrying the unit price; drives the price-only baseline and budgets.
pub const PRICE_ATTRIBUTE: &str = "price";

/// Value kind of an attribute.
///
/// Serialized as a bare string (`"real"`, `"bounded01"`, ...) except for
/// categorical kinds, which carry their levels: `{"categorical": ["a", "b"]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Real,
    Bounded01,
    Percent,
    Boolean,
    Categorical(Vec<String>),
    Count,
}

impl AttributeKind {
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            AttributeKind::Real
                | AttributeKind::Bounded01
                | AttributeKind::Percent
                | AttributeKind::Count
        )
    }

    /// Closed interval every value of a numeric kind must lie in.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            AttributeKind::Real => Some((f64::NEG_INFINITY, f64::INFINITY)),
            AttributeKind::Bounded01 => Some((0.0, 1.0)),
            AttributeKind::Percent => Some((0.0, 100.0)),
            AttributeKind::Count => Some((0.0, f64::INFINITY)),
            AttributeKind::Boolean | AttributeKind::Categorical(_) => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            AttributeKind::Categorical(levels) => Some(levels),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeKind::Real => f.write_str("real"),
            AttributeKind::Bounded01 => f.write_str("bounded01"),
            AttributeKind::Percent => f.write_str("percent"),
            AttributeKind::Boolean => f.write_str("boolean"),
            AttributeKind::Categorical(_) => f.write_str("categorical"),
            AttributeKind::Count => f.write_str("count"),
        }
    }
}

/// Ethical direction of an attribute in the utilitarian score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McdaSign {
    Positive,
    Negative,
    /// Rule-only attribute; never scored.
    Excluded,
}

impl McdaSign {
    pub fn factor(self) -> f64 {
        match self {
            McdaSign::Positive => 1.0,
            McdaSign::Negative => -1.0,
            McdaSign::Excluded => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDef {
    pub name: String,
    pub unit: String,
    pub kind: AttributeKind,
    pub mcda_sign: McdaSign,
    /// Criterion key in the weights file; defaults to the attribute name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_weight_key: Option<String>,
    /// Uniform sampling interval used by the scenario generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_range: Option<[f64; 2]>,
    /// Decimal places kept on sampled values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimals: Option<u32>,
    /// Probability a sampled boolean is true (default 0.5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<f64>,
}

impl AttributeDef {
    pub fn weight_key(&self) -> &str {
        self.default_weight_key.as_deref().unwrap_or(&self.name)
    }

    pub fn is_mcda(&self) -> bool {
        self.mcda_sign != McdaSign::Excluded
    }

    /// Sampling interval, falling back to the kind's natural bounds.
    pub fn sampling_interval(&self) -> Option<(f64, f64)> {
        match (self.sample_range, &self.kind) {
            (Some([lo, hi]), _) => Some((lo, hi)),
            (None, AttributeKind::Bounded01) => Some((0.0, 1.0)),
            (None, AttributeKind::Percent) => Some((0.0, 100.0)),
            _ => None,
        }
    }
}

/// Ordered attribute definitions for one product domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSchema {
    pub attributes: Vec<AttributeDef>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl AttributeSchema {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let schema: AttributeSchema = serde_json::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_owned(),
            message: e.to_string(),
        })?;
        let issues = schema.check();
        if issues.is_empty() {
            Ok(schema)
        } else {
            Err(Error::invalid(origin, issues))
        }
    }

    pub fn get(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn mcda_attributes(&self) -> impl Iterator<Item = &AttributeDef> {
        self.attributes.iter().filter(|a| a.is_mcda())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    fn check(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        if self.attributes.is_empty() {
            issues.push(Issue::new("attributes", "at least one attribute is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, attr) in self.attributes.iter().enumerate() {
            let field = |f: &str| format!("attributes[{i}].{f}");
            if !is_identifier(&attr.name) {
                issues.push(Issue::new(
                    field("name"),
                    format!("`{}` is not a valid identifier", attr.name),
                ));
            } else if !seen.insert(attr.name.as_str()) {
                issues.push(Issue::new(
                    attr.name.clone(),
                    format!("duplicate attribute name `{}`", attr.name),
                ));
            }
            if let Some(key) = &attr.default_weight_key {
                if !is_identifier(key) {
                    issues.push(Issue::new(
                        field("default_weight_key"),
                        format!("`{key}` is not a valid identifier"),
                    ));
                }
            }
            match &attr.kind {
                AttributeKind::Categorical(levels) => {
                    if levels.is_empty() {
                        issues.push(Issue::new(
                            field("kind"),
                            format!("categorical `{}` needs at least one level", attr.name),
                        ));
                    }
                    let mut lv = BTreeSet::new();
                    for level in levels {
                        if level.is_empty() || !lv.insert(level.as_str()) {
                            issues.push(Issue::new(
                                field("kind"),
                                format!("empty or duplicate level `{level}` in `{}`", attr.name),
                            ));
                        }
                    }
                    if attr.is_mcda() {
                        issues.push(Issue::new(
                            field("mcda_sign"),
                            format!("categorical `{}` must be excluded from scoring", attr.name),
                        ));
                    }
                }
                AttributeKind::Boolean => {
                    if let Some(p) = attr.p_true {
                        if !(0.0..=1.0).contains(&p) {
                            issues.push(Issue::new(field("p_true"), "must lie in [0, 1]"));
                        }
                    }
                }
                _ => {}
            }
            if !matches!(attr.kind, AttributeKind::Boolean) && attr.p_true.is_some() {
                issues.push(Issue::new(field("p_true"), "only valid on boolean attributes"));
            }
            if attr.kind.is_numeric() {
                match (attr.sampling_interval(), attr.kind.bounds()) {
                    (None, _) => issues.push(Issue::new(
                        field("sample_range"),
                        format!("numeric `{}` needs a sample_range", attr.name),
                    )),
                    (Some((lo, hi)), Some((min, max))) => {
                        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max) {
                            issues.push(Issue::new(
                                field("sample_range"),
                                format!("[{lo}, {hi}] is empty or outside the {} range", attr.kind),
                            ));
                        }
                    }
                    _ => {}
                }
            } else if attr.sample_range.is_some() || attr.decimals.is_some() {
                issues.push(Issue::new(
                    field("sample_range"),
                    "sampling range and decimals only apply to numeric attributes",
                ));
            }
        }
        match self.get(PRICE_ATTRIBUTE) {
            Some(p) if p.kind.is_numeric() => {}
            Some(_) => issues.push(Issue::new(PRICE_ATTRIBUTE, "price must be numeric")),
            None if !self.attributes.is_empty() => issues.push(Issue::new(
                "attributes",
                "a numeric `price` attribute is required",
            )),
            None => {}
        }
        issues
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<AttributeSchema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AttributeSchema::from_json(&text, &path.display().to_string())
}
