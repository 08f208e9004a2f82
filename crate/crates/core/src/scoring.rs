//! Per-round min–max normalization and signed weighted MCDA scoring.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{AttributeKind, AttributeSchema, Value, WeightConfig, PRICE_ATTRIBUTE};
use crate::scenario::Scenario;

/// Normalized value assigned to every option when a round's column is constant.
pub const DEGENERATE_RANGE_VALUE: f64 = 0.5;

/// MCDA attribute name → normalized value in [0, 1].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NormalizedFeatures(pub BTreeMap<String, f64>);

impl NormalizedFeatures {
    pub fn get(&self, attribute: &str) -> Option<f64> {
        self.0.get(attribute).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityScore {
    pub value: f64,
    /// Attribute name → `sign · weight · normalized value`.
    pub contributions: BTreeMap<String, f64>,
}

/// Normalizes every MCDA attribute within one round.
///
/// Numeric columns use `(x − min) / (max − min)`, or
/// [`DEGENERATE_RANGE_VALUE`] when the column is constant. Booleans map
/// straight to 0 or 1.
pub fn normalize_round(
    scenario: &Scenario,
    schema: &AttributeSchema,
) -> BTreeMap<String, NormalizedFeatures> {
    let mut out: BTreeMap<String, NormalizedFeatures> = scenario
        .options
        .iter()
        .map(|o| (o.option_id.clone(), NormalizedFeatures::default()))
        .collect();
    for def in schema.mcda_attributes() {
        match def.kind {
            AttributeKind::Boolean => {
                for o in &scenario.options {
                    let x = match o.value(&def.name) {
                        Some(Value::Bool(true)) => 1.0,
                        _ => 0.0,
                    };
                    out.get_mut(&o.option_id).unwrap().0.insert(def.name.clone(), x);
                }
            }
            _ => {
                let column: Vec<f64> = scenario
                    .options
                    .iter()
                    .map(|o| o.number(&def.name).unwrap_or(0.0))
                    .collect();
                let min = column.iter().copied().fold(f64::INFINITY, f64::min);
                let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (o, x) in scenario.options.iter().zip(column) {
                    let n = if max > min {
                        (x - min) / (max - min)
                    } else {
                        DEGENERATE_RANGE_VALUE
                    };
                    out.get_mut(&o.option_id).unwrap().0.insert(def.name.clone(), n);
                }
            }
        }
    }
    out
}

/// `U = Σ sign_k · w_k · x̂_k` over MCDA attributes, summed in schema order.
pub fn utility(
    features: &NormalizedFeatures,
    weights: &WeightConfig,
    schema: &AttributeSchema,
) -> UtilityScore {
    let mut value = 0.0;
    let mut contributions = BTreeMap::new();
    for def in schema.mcda_attributes() {
        let c = def.mcda_sign.factor() * weights.weight(&def.name) * features.get(&def.name).unwrap_or(0.0);
        value += c;
        contributions.insert(def.name.clone(), c);
    }
    UtilityScore {
        value,
        contributions,
    }
}

/// Scores every option of a round under `weights`.
pub fn score_round(
    scenario: &Scenario,
    schema: &AttributeSchema,
    weights: &WeightConfig,
) -> BTreeMap<String, UtilityScore> {
    normalize_round(scenario, schema)
        .iter()
        .map(|(id, f)| (id.clone(), utility(f, weights, schema)))
        .collect()
}

/// Cheapest option by raw price; ties go to the smallest option id.
pub fn price_baseline_choice(scenario: &Scenario) -> Option<&str> {
    scenario
        .options
        .iter()
        .map(|o| (o.number(PRICE_ATTRIBUTE).unwrap_or(f64::INFINITY), o.option_id.as_str()))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .map(|(_, id)| id)
}
