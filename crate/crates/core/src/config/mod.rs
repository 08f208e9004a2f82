//! Configuration artifacts: attribute schema, deontic rules, utilitarian
//! weights, certification map, experiment settings and explanation templates.
//!
//! Every loader validates its file completely and reports all findings in file
//! order. [`ConfigBundle`] loads the full set and checks cross-file references.

mod certmap;
mod experiment;
mod predicate;
mod rules;
mod schema;
mod value;
mod weights;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use certmap::{load_cert_map, parse_cert_map, CertEffect, CertMap};
pub use experiment::{load_experiment, Condition, ExperimentConfig, SeverityAggregation};
pub use predicate::{parse_predicate, CmpOp, PredicateExpr};
pub use rules::{load_rules, parse_rules, Rule};
pub use schema::{load_schema, AttributeDef, AttributeKind, AttributeSchema, McdaSign, PRICE_ATTRIBUTE};
pub use value::Value;
pub use weights::{load_weights, parse_weights, WeightConfig, DEFAULT_PROFILE};

use crate::error::{Error, Issue, Result};
use crate::explain::{self, TemplateSet};

pub const SCHEMA_FILE: &str = "attribute_schema.json";
pub const RULES_FILE: &str = "kantian_rules.yml";
pub const WEIGHTS_FILE: &str = "utilitarian_weights.yml";
pub const CERT_MAP_FILE: &str = "cert_map.yml";
pub const EXPERIMENT_FILE: &str = "experiment_config.yml";
pub const TEMPLATES_FILE: &str = "explanation_templates.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigPaths {
    pub schema: PathBuf,
    pub rules: PathBuf,
    pub weights: PathBuf,
    pub cert_map: PathBuf,
    pub experiment: PathBuf,
    pub templates: PathBuf,
}

impl ConfigPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        ConfigPaths {
            schema: dir.join(SCHEMA_FILE),
            rules: dir.join(RULES_FILE),
            weights: dir.join(WEIGHTS_FILE),
            cert_map: dir.join(CERT_MAP_FILE),
            experiment: dir.join(EXPERIMENT_FILE),
            templates: dir.join(TEMPLATES_FILE),
        }
    }
}

/// A complete, cross-validated configuration. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct ConfigBundle {
    pub schema: AttributeSchema,
    pub rules: Vec<Rule>,
    pub weights: BTreeMap<String, WeightConfig>,
    pub cert_map: CertMap,
    pub experiment: ExperimentConfig,
    pub templates: TemplateSet,
}

fn keep<T>(errors: &mut Vec<Error>, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(e);
            None
        }
    }
}

impl ConfigBundle {
    /// Loads every file, collecting errors from all of them.
    pub fn load(paths: &ConfigPaths) -> std::result::Result<Self, Vec<Error>> {
        let files = [
            &paths.schema,
            &paths.rules,
            &paths.weights,
            &paths.cert_map,
            &paths.experiment,
            &paths.templates,
        ];
        let mut errors = Vec::new();
        let mut texts: [Option<String>; 6] = Default::default();
        for (slot, path) in texts.iter_mut().zip(files) {
            *slot = keep(
                &mut errors,
                std::fs::read_to_string(path).map_err(|e| Error::io(path.as_path(), e)),
            );
        }
        let names = files.map(|p| p.display().to_string());
        match Self::from_texts(&names.each_ref().map(String::as_str), texts) {
            Ok(bundle) if errors.is_empty() => Ok(bundle),
            Ok(_) => Err(errors),
            Err(more) => {
                errors.extend(more);
                Err(errors)
            }
        }
    }

    /// The configuration shipped in the repository's `configs/` directory.
    pub fn builtin() -> Self {
        let texts = [
            include_str!("../../../../configs/attribute_schema.json"),
            include_str!("../../../../configs/kantian_rules.yml"),
            include_str!("../../../../configs/utilitarian_weights.yml"),
            include_str!("../../../../configs/cert_map.yml"),
            include_str!("../../../../configs/experiment_config.yml"),
            include_str!("../../../../configs/explanation_templates.csv"),
        ];
        let names = [
            SCHEMA_FILE,
            RULES_FILE,
            WEIGHTS_FILE,
            CERT_MAP_FILE,
            EXPERIMENT_FILE,
            TEMPLATES_FILE,
        ];
        Self::from_texts(&names, texts.map(|t| Some(t.to_owned())))
            .expect("shipped configuration is valid")
    }

    /// Parses whichever texts are present. Files depending on the schema are
    /// skipped when the schema itself is missing or invalid.
    fn from_texts(
        names: &[&str; 6],
        texts: [Option<String>; 6],
    ) -> std::result::Result<Self, Vec<Error>> {
        let mut errors = Vec::new();
        let [schema, rules, weights, cert_map, experiment, templates] = texts;
        let schema = schema.and_then(|t| keep(&mut errors, AttributeSchema::from_json(&t, names[0])));
        let (mut r, mut w, mut c) = (None, None, None);
        if let Some(schema) = &schema {
            r = rules.and_then(|t| keep(&mut errors, parse_rules(&t, schema, names[1])));
            w = weights.and_then(|t| keep(&mut errors, parse_weights(&t, schema, names[2])));
            c = cert_map.and_then(|t| keep(&mut errors, parse_cert_map(&t, schema, names[3])));
        }
        let e = experiment.and_then(|t| keep(&mut errors, ExperimentConfig::from_yaml(&t, names[4])));
        let t = templates.and_then(|t| keep(&mut errors, explain::parse_templates(&t, names[5])));
        match (schema, r, w, c, e, t) {
            (Some(schema), Some(rules), Some(weights), Some(cert_map), Some(experiment), Some(templates)) => {
                let bundle = ConfigBundle {
                    schema,
                    rules,
                    weights,
                    cert_map,
                    experiment,
                    templates,
                };
                bundle.cross_check().map_err(|e| vec![e])?;
                Ok(bundle)
            }
            _ => Err(errors),
        }
    }

    /// Checks references that span files.
    pub fn cross_check(&self) -> Result<()> {
        let mut issues = Vec::new();
        for (field, profile) in [
            ("weight_profile", Some(self.experiment.weight_profile.as_str())),
            ("personalized_profile", self.experiment.personalized_profile.as_deref()),
        ] {
            if let Some(p) = profile {
                if !self.weights.contains_key(p) {
                    issues.push(Issue::new(field, format!("no weight profile named `{p}`")));
                }
            }
        }
        for id in explain::REQUIRED_TEMPLATES {
            if self.templates.get(id).is_none() {
                issues.push(Issue::new("templates", format!("missing template `{id}`")));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid("configuration", issues))
        }
    }

    /// Weights behind the welfare measure and the utilitarian engine.
    pub fn welfare_weights(&self) -> &WeightConfig {
        &self.weights[&self.experiment.weight_profile]
    }

    pub fn profile(&self, name: &str) -> Option<&WeightConfig> {
        self.weights.get(name)
    }

    /// Weights behind the no-explanation agent.
    pub fn personalized_weights(&self) -> &WeightConfig {
        &self.weights[self.experiment.personalized_profile()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_bundle_loads() {
        let b = ConfigBundle::builtin();
        assert_eq!(b.rules.len(), 6);
        assert_eq!(b.welfare_weights().profile_name, "default");
    }

    #[test]
    fn missing_file_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let errors = ConfigBundle::load(&ConfigPaths::in_dir(dir.path())).unwrap_err();
        assert_eq!(errors.len(), 6);
        assert!(errors[1].to_string().contains(RULES_FILE));
    }

    #[test]
    fn unknown_profile_is_cross_file_error() {
        let mut b = ConfigBundle::builtin();
        b.experiment.weight_profile = "ghost".into();
        let err = b.cross_check().unwrap_err();
        assert_eq!(err.issues()[0].field, "weight_profile");
    }
}
