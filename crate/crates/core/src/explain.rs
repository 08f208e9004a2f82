//! Why/Details text from placeholder templates.
//!
//! Templates live in `explanation_templates.csv` (`template_id,condition,text`).
//! Placeholders are `{key}`; each condition has a fixed set of keys it may use,
//! checked at load so that rendering from engine output never fails.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};
use crate::kantian::{DeonticReport, Violation};
use crate::meta::{MetaDecision, RationaleKind};
use crate::numfmt::fmt_real;
use crate::scoring::UtilityScore;

/// Templates the engines render directly; a bundle without them is invalid.
pub const REQUIRED_TEMPLATES: [&str; 6] = [
    "kantian_generic",
    "kantian_clean",
    "utilitarian_score",
    "meta_aligned",
    "meta_switched",
    "meta_kept",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateCondition {
    Kantian,
    Utilitarian,
    MetaAligned,
    MetaSwitched,
    MetaKept,
}

impl TemplateCondition {
    /// Keys a template of this condition may reference.
    pub fn context_keys(self) -> &'static [&'static str] {
        match self {
            TemplateCondition::Kantian => &[
                "rule_id",
                "description",
                "attribute",
                "value",
                "severity",
                "option_label",
            ],
            TemplateCondition::Utilitarian => &["option_label", "utility", "attribute", "value"],
            TemplateCondition::MetaAligned => &["option_label", "utility"],
            TemplateCondition::MetaSwitched => {
                &["option_label", "best_label", "regret", "rho", "utility"]
            }
            TemplateCondition::MetaKept => {
                &["option_label", "best_label", "violations", "rho", "utility"]
            }
        }
    }
}

impl FromStr for TemplateCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "kantian" => TemplateCondition::Kantian,
            "utilitarian" => TemplateCondition::Utilitarian,
            "meta_aligned" => TemplateCondition::MetaAligned,
            "meta_switched" => TemplateCondition::MetaSwitched,
            "meta_kept" => TemplateCondition::MetaKept,
            other => return Err(format!("unknown template condition `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Key(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub template_id: String,
    pub condition: TemplateCondition,
    pub text: String,
    pieces: Vec<Piece>,
}

impl Template {
    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Key(k) => Some(k.as_str()),
            Piece::Text(_) => None,
        })
    }
}

fn split_placeholders(text: &str) -> std::result::Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(format!("unmatched `}}` in `{text}`"));
        }
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_owned()));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| format!("unclosed `{{` in `{text}`"))?;
        let key = &after[..close];
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("malformed placeholder `{{{key}}}`"));
        }
        pieces.push(Piece::Key(key.to_owned()));
        rest = &after[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_owned()));
    }
    Ok(pieces)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
}

impl TemplateSet {
    pub fn get(&self, template_id: &str) -> Option<&Template> {
        self.templates.get(template_id)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Substitutes every placeholder of `template_id` from `context`.
    pub fn render(&self, template_id: &str, context: &BTreeMap<&str, String>) -> Result<String> {
        let template = self
            .get(template_id)
            .ok_or_else(|| Error::UnknownTemplate(template_id.to_owned()))?;
        let mut out = String::with_capacity(template.text.len() + 16);
        for piece in &template.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Key(k) => out.push_str(context.get(k.as_str()).ok_or_else(|| {
                    Error::MissingPlaceholder {
                        template_id: template_id.to_owned(),
                        key: k.clone(),
                    }
                })?),
            }
        }
        Ok(out)
    }
}

pub fn parse_templates(text: &str, origin: &str) -> Result<TemplateSet> {
    let parse_err = |message: String| Error::Parse {
        origin: origin.to_owned(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["template_id", "condition", "text"] {
        return Err(parse_err(format!(
            "expected columns template_id,condition,text; found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut templates = BTreeMap::new();
    let mut issues = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let (id, cond, body) = (&record[0], &record[1], &record[2]);
        let field = format!("line {line}");
        let condition = match cond.parse::<TemplateCondition>() {
            Ok(c) => c,
            Err(m) => {
                issues.push(Issue::new(field, m));
                continue;
            }
        };
        let pieces = match split_placeholders(body) {
            Ok(p) => p,
            Err(m) => {
                issues.push(Issue::new(field, m));
                continue;
            }
        };
        let template = Template {
            template_id: id.to_owned(),
            condition,
            text: body.to_owned(),
            pieces,
        };
        for key in template.placeholders() {
            if !condition.context_keys().contains(&key) {
                issues.push(Issue::new(
                    id,
                    format!("placeholder `{{{key}}}` is not available to {cond} templates"),
                ));
            }
        }
        if id.is_empty() || templates.insert(id.to_owned(), template).is_some() {
            issues.push(Issue::new(field, format!("empty or duplicate template id `{id}`")));
        }
    }
    if issues.is_empty() {
        Ok(TemplateSet { templates })
    } else {
        Err(Error::invalid(origin, issues))
    }
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<TemplateSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_templates(&text, &path.display().to_string())
}

/// Renders engine outputs into sentences.
#[derive(Debug, Clone, Copy)]
pub struct Explainer<'a> {
    templates: &'a TemplateSet,
}

struct Ctx(BTreeMap<&'static str, String>);

impl Ctx {
    fn new() -> Self {
        Ctx(BTreeMap::new())
    }

    fn with(mut self, key: &'static str, value: impl fmt::Display) -> Self {
        self.0.insert(key, value.to_string());
        self
    }
}

impl<'a> Explainer<'a> {
    pub fn new(templates: &'a TemplateSet) -> Self {
        Explainer { templates }
    }

    fn render(&self, id: &str, ctx: Ctx) -> String {
        self.templates
            .render(id, &ctx.0)
            .expect("template placeholders are validated at load")
    }

    /// One sentence per violated rule; rule-specific templates win over the generic one.
    pub fn violation(&self, option_label: &str, violation: &Violation) -> String {
        let specific = format!("kantian_{}", violation.rule_id);
        let id = if self.templates.get(&specific).is_some() {
            specific.as_str()
        } else {
            "kantian_generic"
        };
        let (attribute, value) = violation
            .triggering_values
            .first()
            .map(|(a, v)| (a.clone(), v.to_string()))
            .unwrap_or_default();
        let ctx = Ctx::new()
            .with("rule_id", &violation.rule_id)
            .with("description", &violation.description)
            .with("attribute", attribute)
            .with("value", value)
            .with("severity", fmt_real(violation.severity))
            .with("option_label", option_label);
        self.render(id, ctx)
    }

    pub fn deontic(&self, option_label: &str, report: &DeonticReport) -> String {
        if report.clean {
            self.render("kantian_clean", Ctx::new().with("option_label", option_label))
        } else {
            report
                .violations
                .iter()
                .map(|v| self.violation(option_label, v))
                .collect::<Vec<_>>()
                .join(" ")
        }
    }

    pub fn utility(&self, option_label: &str, score: &UtilityScore) -> String {
        let (attribute, value) = score
            .contributions
            .iter()
            .fold(None::<(&String, f64)>, |best, (k, &c)| match best {
                Some((_, b)) if b.abs() >= c.abs() => best,
                _ => Some((k, c)),
            })
            .map(|(k, c)| (k.clone(), fmt_real(c)))
            .unwrap_or_default();
        let ctx = Ctx::new()
            .with("option_label", option_label)
            .with("utility", fmt_real(score.value))
            .with("attribute", attribute)
            .with("value", value);
        self.render("utilitarian_score", ctx)
    }

    /// Sentence for a meta-explainer decision.
    ///
    /// `best_violations` lists the rule ids broken by the utility-best option.
    pub fn meta(
        &self,
        decision: &MetaDecision,
        chosen_label: &str,
        best_label: &str,
        chosen_utility: f64,
        best_violations: &[String],
        rho: f64,
    ) -> String {
        let base = Ctx::new()
            .with("option_label", chosen_label)
            .with("utility", fmt_real(chosen_utility));
        match decision.rationale {
            RationaleKind::Aligned => self.render("meta_aligned", base),
            RationaleKind::SwitchedClean => self.render(
                "meta_switched",
                base.with("best_label", best_label)
                    .with("regret", fmt_real(decision.regret))
                    .with("rho", fmt_real(rho)),
            ),
            RationaleKind::KeptDespiteViolation => self.render(
                "meta_kept",
                base.with("best_label", best_label)
                    .with("violations", best_violations.join(", "))
                    .with("rho", fmt_real(rho)),
            ),
        }
    }
}
