//! Normalization and utility invariants on random rounds.

use std::collections::BTreeMap;

use ethicup_core::config::{AttributeKind, AttributeSchema, ConfigBundle, McdaSign, Value};
use ethicup_core::scenario::{ProductOption, Scenario};
use ethicup_core::scoring::{normalize_round, score_round, utility, DEGENERATE_RANGE_VALUE};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn bundle() -> ConfigBundle {
    ConfigBundle::builtin()
}

/// A random round whose numeric values lie in each attribute's sampling range.
fn round(schema: AttributeSchema, options: std::ops::Range<usize>) -> impl Strategy<Value = Scenario> {
    let defs = schema.attributes.clone();
    let width = defs.len();
    prop::collection::vec(prop::collection::vec((0.0f64..=1.0, any::<bool>(), any::<prop::sample::Index>()), width), options)
        .prop_map(move |rows| Scenario {
            scenario_id: "S01".into(),
            round_index: 1,
            options: rows
                .into_iter()
                .enumerate()
                .map(|(i, cells)| ProductOption {
                    option_id: char::from(b'A' + i as u8).to_string(),
                    label: String::new(),
                    values: defs
                        .iter()
                        .zip(cells)
                        .map(|(def, (u, b, ix))| {
                            let v = match &def.kind {
                                AttributeKind::Boolean => Value::Bool(b),
                                AttributeKind::Categorical(levels) => Value::Level(ix.get(levels).clone()),
                                AttributeKind::Count => {
                                    let (lo, hi) = def.sampling_interval().unwrap();
                                    Value::Number((lo + u * (hi - lo)).round())
                                }
                                _ => {
                                    let (lo, hi) = def.sampling_interval().unwrap();
                                    Value::Number(lo + u * (hi - lo))
                                }
                            };
                            (def.name.clone(), v)
                        })
                        .collect(),
                })
                .collect(),
        })
}

fn numeric_mcda(schema: &AttributeSchema) -> Vec<String> {
    schema
        .mcda_attributes()
        .filter(|a| a.kind.is_numeric())
        .map(|a| a.name.clone())
        .collect()
}

fn map_column(s: &Scenario, attribute: &str, f: impl Fn(f64) -> f64) -> Scenario {
    let mut out = s.clone();
    for o in &mut out.options {
        let x = o.number(attribute).unwrap();
        o.values.insert(attribute.to_owned(), Value::Number(f(x)));
    }
    out
}

/// Brute-force min–max normalizer written out per column.
fn oracle_normalize(s: &Scenario, schema: &AttributeSchema) -> BTreeMap<(String, String), f64> {
    let mut out = BTreeMap::new();
    for def in schema.mcda_attributes() {
        let column: Vec<f64> = s
            .options
            .iter()
            .map(|o| match o.value(&def.name).unwrap() {
                Value::Number(x) => *x,
                Value::Bool(b) => f64::from(u8::from(*b)),
                Value::Level(_) => unreachable!("categorical attributes are excluded"),
            })
            .collect();
        let mut lo = column[0];
        let mut hi = column[0];
        for &x in &column[1..] {
            if x < lo {
                lo = x;
            }
            if x > hi {
                hi = x;
            }
        }
        for (o, x) in s.options.iter().zip(column) {
            let n = if def.kind == AttributeKind::Boolean {
                x
            } else if hi == lo {
                0.5
            } else {
                (x - lo) / (hi - lo)
            };
            out.insert((o.option_id.clone(), def.name.clone()), n);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn normalization_matches_oracle(s in round(bundle().schema, 1..7)) {
        let schema = bundle().schema;
        let expected = oracle_normalize(&s, &schema);
        let got = normalize_round(&s, &schema);
        for ((id, attr), x) in expected {
            let n = got[&id].get(&attr).unwrap();
            prop_assert!((n - x).abs() <= 1e-12, "{id}.{attr}: {n} vs {x}");
            prop_assert!((0.0..=1.0).contains(&n));
        }
    }

    #[test]
    fn affine_transform_preserves_normalization(
        s in round(bundle().schema, 2..6),
        col in any::<prop::sample::Index>(),
        scale in 0.01f64..100.0,
        shift in -1000.0f64..1000.0,
    ) {
        let schema = bundle().schema;
        let attr = col.get(&numeric_mcda(&schema)).clone();
        let before = normalize_round(&s, &schema);
        let after = normalize_round(&map_column(&s, &attr, |x| scale * x + shift), &schema);
        for (id, f) in &before {
            for (a, x) in &f.0 {
                let y = after[id].get(a).unwrap();
                prop_assert!((x - y).abs() <= 1e-9, "{id}.{a}: {x} vs {y}");
            }
        }
    }

    /// Dyadic inputs under power-of-two scaling and dyadic shifts are exact in
    /// binary floating point, so the normalized values agree bit for bit.
    #[test]
    fn exact_affine_transform_is_bit_identical(
        mut s in round(bundle().schema, 2..6),
        raw in prop::collection::vec(0u32..4096, 6),
        exponent in -4i32..8,
        shift in -4096i32..4096,
    ) {
        let schema = bundle().schema;
        for (o, k) in s.options.iter_mut().zip(&raw) {
            o.values.insert("carbon".into(), Value::Number(f64::from(*k) / 16.0));
        }
        let scale = 2f64.powi(exponent);
        let moved = map_column(&s, "carbon", |x| scale * x + f64::from(shift) / 8.0);
        let before = normalize_round(&s, &schema);
        let after = normalize_round(&moved, &schema);
        for (id, f) in &before {
            prop_assert_eq!(f.get("carbon").unwrap().to_bits(), after[id].get("carbon").unwrap().to_bits());
        }
    }

    #[test]
    fn utility_is_bounded_and_decomposes(s in round(bundle().schema, 1..7), alt in any::<bool>()) {
        let b = bundle();
        let weights = &b.weights[if alt { "alt" } else { "default" }];
        for (id, score) in score_round(&s, &b.schema, weights) {
            prop_assert!(score.value.abs() <= 1.0 + 1e-12, "{id}: {}", score.value);
            let total: f64 = score.contributions.values().sum();
            prop_assert!((total - score.value).abs() <= 1e-12);
            for def in b.schema.mcda_attributes() {
                let c = score.contributions[&def.name];
                match def.mcda_sign {
                    McdaSign::Positive => prop_assert!(c >= 0.0),
                    McdaSign::Negative => prop_assert!(c <= 0.0),
                    McdaSign::Excluded => unreachable!(),
                }
            }
            prop_assert!(b.schema.attributes.iter().filter(|a| !a.is_mcda()).all(|a| !score.contributions.contains_key(&a.name)));
        }
    }

    #[test]
    fn improving_an_attribute_never_hurts(
        s in round(bundle().schema, 2..6),
        who in any::<prop::sample::Index>(),
        col in any::<prop::sample::Index>(),
        step in 0.0f64..50.0,
    ) {
        let b = bundle();
        let attrs = numeric_mcda(&b.schema);
        let attr = col.get(&attrs);
        let def = b.schema.get(attr).unwrap();
        let i = who.index(s.options.len());
        let id = s.options[i].option_id.clone();
        let mut better = s.clone();
        let x = better.options[i].number(attr).unwrap();
        let moved = x + def.mcda_sign.factor() * step;
        better.options[i].values.insert(attr.clone(), Value::Number(moved));
        let w = b.welfare_weights();
        let u0 = score_round(&s, &b.schema, w)[&id].value;
        let u1 = score_round(&better, &b.schema, w)[&id].value;
        prop_assert!(u1 >= u0 - 1e-12, "{attr}: {u0} -> {u1}");
    }
}

#[test]
fn constant_column_gets_half() {
    let b = bundle();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let s = round(b.schema.clone(), 3..4).new_tree(&mut runner).unwrap().current();
    let flat = map_column(&s, "water", |_| 42.0);
    for f in normalize_round(&flat, &b.schema).values() {
        assert_eq!(f.get("water"), Some(DEGENERATE_RANGE_VALUE));
    }
}

#[test]
fn oracle_dot_product_on_generated_pool() {
    let b = bundle();
    let pool = ethicup_core::scenario::generate_pool(&b.experiment, &b.schema, &b.rules, &b.cert_map).unwrap();
    let w = b.welfare_weights();
    for s in &pool {
        let norm = oracle_normalize(s, &b.schema);
        for o in &s.options {
            let mut expected = 0.0;
            for def in b.schema.mcda_attributes() {
                expected += def.mcda_sign.factor() * w.weight(&def.name) * norm[&(o.option_id.clone(), def.name.clone())];
            }
            let features = &normalize_round(s, &b.schema)[&o.option_id];
            let got = utility(features, w, &b.schema).value;
            assert!((got - expected).abs() <= 1e-12, "{}: {got} vs {expected}", o.option_id);
        }
    }
}
