use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeDef, AttributeKind};
use crate::numfmt::fmt_real;

/// A typed attribute value.
///
/// Every numeric kind (real, bounded01, percent, count) is stored as `Number`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Level(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Parses a textual cell according to `def`'s kind and checks its range.
    pub fn parse_for(def: &AttributeDef, text: &str) -> Result<Value, String> {
        let text = text.trim();
        let value = match &def.kind {
            AttributeKind::Boolean => match text {
                "true" | "1" => Value::Bool(true),
                "false" | "0" => Value::Bool(false),
                other => return Err(format!("`{other}` is not a boolean")),
            },
            AttributeKind::Categorical(_) => Value::Level(text.to_owned()),
            _ => Value::Number(
                text.parse::<f64>()
                    .map_err(|_| format!("`{text}` is not a number"))?,
            ),
        };
        value.check_against(def)?;
        Ok(value)
    }

    /// Checks this value is of `def`'s kind and within its range.
    pub fn check_against(&self, def: &AttributeDef) -> Result<(), String> {
        match (&def.kind, self) {
            (AttributeKind::Boolean, Value::Bool(_)) => Ok(()),
            (AttributeKind::Categorical(levels), Value::Level(l)) => {
                if levels.iter().any(|x| x == l) {
                    Ok(())
                } else {
                    Err(format!("`{l}` is not one of {levels:?}"))
                }
            }
            (kind, Value::Number(x)) if kind.is_numeric() => {
                let (lo, hi) = kind.bounds().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                if !x.is_finite() {
                    Err(format!("{x} is not finite"))
                } else if *x < lo || *x > hi {
                    Err(format!("{x} outside [{lo}, {hi}]"))
                } else if matches!(kind, AttributeKind::Count) && x.fract() != 0.0 {
                    Err(format!("{x} is not a whole count"))
                } else {
                    Ok(())
                }
            }
            (kind, v) => Err(format!("{v} is not a {kind} value")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(x) => f.write_str(&fmt_real(*x)),
            Value::Level(l) => f.write_str(l),
        }
    }
}
