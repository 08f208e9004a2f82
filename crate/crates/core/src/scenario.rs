//! Product options, scenario rounds, the seeded generator and CSV I/O.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{AttributeKind, AttributeSchema, CertMap, ExperimentConfig, Rule, Value};
use crate::error::{Error, Result};
use crate::kantian;
use crate::numfmt::round_sig6;

/// Rejection-sampling cap per scenario for the clean-option guarantee.
pub const MAX_ATTEMPTS: u32 = 1000;

const FIXED_COLUMNS: [&str; 4] = ["scenario_id", "round", "option_id", "label"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductOption {
    pub option_id: String,
    pub label: String,
    pub values: BTreeMap<String, Value>,
}

impl ProductOption {
    pub fn value(&self, attribute: &str) -> Option<&Value> {
        self.values.get(attribute)
    }

    pub fn number(&self, attribute: &str) -> Option<f64> {
        self.values.get(attribute).and_then(Value::as_number)
    }

    /// Checks every schema attribute is present, typed and in range.
    pub fn validate(&self, schema: &AttributeSchema) -> std::result::Result<(), String> {
        for def in &schema.attributes {
            let v = self
                .values
                .get(&def.name)
                .ok_or_else(|| format!("option {} lacks `{}`", self.option_id, def.name))?;
            v.check_against(def)
                .map_err(|m| format!("option {} `{}`: {m}", self.option_id, def.name))?;
        }
        if let Some(extra) = self.values.keys().find(|k| schema.get(k).is_none()) {
            return Err(format!("option {} has unknown attribute `{extra}`", self.option_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    /// 1-based.
    pub round_index: u32,
    pub options: Vec<ProductOption>,
}

impl Scenario {
    pub fn option(&self, option_id: &str) -> Option<&ProductOption> {
        self.options.iter().find(|o| o.option_id == option_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.option_id.as_str())
    }
}

fn option_letter(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("O{}", i + 1)
    }
}

fn sample_option(
    rng: &mut ChaCha8Rng,
    schema: &AttributeSchema,
    certs: &CertMap,
    cert_rate: f64,
    option_id: String,
) -> ProductOption {
    let mut values = BTreeMap::new();
    for def in &schema.attributes {
        let value = match &def.kind {
            AttributeKind::Boolean => Value::Bool(rng.gen_bool(def.p_true.unwrap_or(0.5))),
            AttributeKind::Categorical(levels) => {
                Value::Level(levels[rng.gen_range(0..levels.len())].clone())
            }
            AttributeKind::Count => {
                let (lo, hi) = def.sampling_interval().unwrap_or((0.0, 0.0));
                Value::Number(rng.gen_range(lo.ceil() as i64..=hi.floor() as i64) as f64)
            }
            _ => {
                let (lo, hi) = def.sampling_interval().unwrap_or((0.0, 0.0));
                let mut x = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
                if let Some(d) = def.decimals {
                    let scale = 10f64.powi(d as i32);
                    x = (x * scale).round() / scale;
                }
                Value::Number(round_sig6(x.clamp(lo, hi)))
            }
        };
        values.insert(def.name.clone(), value);
    }
    let mut label = format!("Coffee {option_id}");
    if !certs.is_empty() && rng.gen_bool(cert_rate) {
        let names: Vec<&str> = certs.names().collect();
        let cert = *names.choose(rng).expect("nonempty");
        for (attribute, effect) in &certs.entries[cert] {
            if let Some(v) = values.get_mut(attribute) {
                *v = effect.apply(v);
            }
        }
        label = format!("{label} ({cert})");
    }
    ProductOption {
        option_id,
        label,
        values,
    }
}

/// Generates `config.rounds` scenarios from `config.seed`.
///
/// Each scenario is resampled until at least one option is clean under
/// `rules`; after [`MAX_ATTEMPTS`] failures the pool is infeasible.
pub fn generate_pool(
    config: &ExperimentConfig,
    schema: &AttributeSchema,
    rules: &[Rule],
    certs: &CertMap,
) -> Result<Vec<Scenario>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool = Vec::with_capacity(config.rounds as usize);
    for round in 1..=config.rounds {
        let scenario_id = format!("S{round:02}");
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let options: Vec<_> = (0..config.options_per_round as usize)
                .map(|i| sample_option(&mut rng, schema, certs, config.cert_rate, option_letter(i)))
                .collect();
            if options.iter().any(|o| kantian::is_clean(o, rules)) {
                accepted = Some(options);
                break;
            }
        }
        let options = accepted.ok_or_else(|| Error::Infeasible {
            scenario_id: scenario_id.clone(),
            attempts: MAX_ATTEMPTS,
        })?;
        pool.push(Scenario {
            scenario_id,
            round_index: round,
            options,
        });
    }
    Ok(pool)
}

pub fn write_scenarios<W: Write>(pool: &[Scenario], schema: &AttributeSchema, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let header: Vec<&str> = FIXED_COLUMNS.into_iter().chain(schema.names()).collect();
    let to_err = |e: csv::Error| Error::Parse {
        origin: "coffee_scenarios.csv".into(),
        message: e.to_string(),
    };
    w.write_record(&header).map_err(to_err)?;
    for scenario in pool {
        for option in &scenario.options {
            let mut row = vec![
                scenario.scenario_id.clone(),
                scenario.round_index.to_string(),
                option.option_id.clone(),
                option.label.clone(),
            ];
            row.extend(schema.names().map(|n| {
                option
                    .values
                    .get(n)
                    .map(ToString::to_string)
                    .unwrap_or_default()
            }));
            w.write_record(&row).map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("coffee_scenarios.csv", e))?;
    Ok(())
}

pub fn save_scenarios(pool: &[Scenario], schema: &AttributeSchema, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_scenarios(pool, schema, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Reads scenarios from CSV. Errors name the line and column at fault.
pub fn read_scenarios<R: Read>(input: R, schema: &AttributeSchema, origin: &str) -> Result<Vec<Scenario>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let parse_err = |message: String| Error::Parse {
        origin: origin.to_owned(),
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let index: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for col in FIXED_COLUMNS.into_iter().chain(schema.names()) {
        if !index.contains_key(col) {
            return Err(parse_err(format!("missing column `{col}`")));
        }
    }
    if let Some(extra) = headers
        .iter()
        .find(|h| !FIXED_COLUMNS.contains(h) && schema.get(h).is_none())
    {
        return Err(parse_err(format!("unknown column `{extra}`")));
    }

    let mut pool: Vec<Scenario> = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row {
            origin: origin.to_owned(),
            line,
            message,
        };
        let cell = |col: &str| record.get(index[col]).unwrap_or("");
        let scenario_id = cell("scenario_id").to_owned();
        let option_id = cell("option_id").to_owned();
        if scenario_id.is_empty() || option_id.is_empty() {
            return Err(row_err("empty scenario_id or option_id".into()));
        }
        let round: u32 = cell("round")
            .parse()
            .ok()
            .filter(|r| *r >= 1)
            .ok_or_else(|| row_err(format!("column `round`: `{}` is not a positive integer", cell("round"))))?;
        if !seen.insert((scenario_id.clone(), option_id.clone())) {
            return Err(row_err(format!("duplicate option `{option_id}` in scenario `{scenario_id}`")));
        }
        let mut values = BTreeMap::new();
        for def in &schema.attributes {
            let v = Value::parse_for(def, cell(&def.name))
                .map_err(|m| row_err(format!("column `{}`: {m}", def.name)))?;
            values.insert(def.name.clone(), v);
        }
        let option = ProductOption {
            option_id,
            label: cell("label").to_owned(),
            values,
        };
        match pool.iter_mut().find(|s| s.scenario_id == scenario_id) {
            Some(s) if s.round_index != round => {
                return Err(row_err(format!(
                    "scenario `{scenario_id}` already declared as round {}",
                    s.round_index
                )))
            }
            Some(s) => s.options.push(option),
            None => pool.push(Scenario {
                scenario_id,
                round_index: round,
                options: vec![option],
            }),
        }
    }
    Ok(pool)
}

pub fn load_scenarios(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scenarios(std::io::BufReader::new(file), schema, &path.display().to_string())
}

/// SHA-256 of the pool's CSV serialization, hex encoded.
pub fn pool_digest(pool: &[Scenario], schema: &AttributeSchema) -> String {
    let mut buf = Vec::new();
    write_scenarios(pool, schema, &mut buf).expect("writing to memory cannot fail");
    Sha256::digest(&buf)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
