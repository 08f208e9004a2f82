//! Rule predicate language.
//!
//! ```text
//! expr    := or
//! or      := and ("||" and)*
//! and     := unary ("&&" unary)*
//! unary   := "!" unary | "(" expr ")" | atom
//! atom    := ident cmp literal | ident "in" "{" literal ("," literal)* "}" | ident
//! cmp     := "<" | "<=" | ">" | ">=" | "==" | "!="
//! literal := number | "true" | "false" | ident | "quoted string"
//! ```
//!
//! A bare identifier tests a boolean attribute for `true`. Identifiers in
//! literal position name categorical levels. Parsing type-checks every atom
//! against the attribute schema, so evaluating a parsed predicate on an option
//! that satisfies the schema cannot fail.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::schema::{is_identifier, AttributeKind, AttributeSchema};
use super::value::Value;
use crate::error::PredicateError;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PredicateExpr {
    Compare {
        attribute: String,
        op: CmpOp,
        value: Value,
    },
    Member {
        attribute: String,
        set: Vec<Value>,
    },
    /// Bare boolean attribute; true when the attribute is true.
    Test(String),
    Not(Box<PredicateExpr>),
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
}

impl PredicateExpr {
    pub fn eval(&self, values: &BTreeMap<String, Value>) -> bool {
        match self {
            PredicateExpr::Compare {
                attribute,
                op,
                value,
            } => values
                .get(attribute)
                .is_some_and(|actual| compare(actual, *op, value)),
            PredicateExpr::Member { attribute, set } => values
                .get(attribute)
                .is_some_and(|actual| set.iter().any(|v| compare(actual, CmpOp::Eq, v))),
            PredicateExpr::Test(attribute) => {
                values.get(attribute) == Some(&Value::Bool(true))
            }
            PredicateExpr::Not(inner) => !inner.eval(values),
            PredicateExpr::And(items) => items.iter().all(|e| e.eval(values)),
            PredicateExpr::Or(items) => items.iter().any(|e| e.eval(values)),
        }
    }

    /// Attributes referenced by the predicate, in order of first appearance.
    pub fn attributes(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_attributes(&mut out);
        out
    }

    fn collect_attributes<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PredicateExpr::Compare { attribute, .. }
            | PredicateExpr::Member { attribute, .. }
            | PredicateExpr::Test(attribute) => {
                if !out.contains(&attribute.as_str()) {
                    out.push(attribute);
                }
            }
            PredicateExpr::Not(inner) => inner.collect_attributes(out),
            PredicateExpr::And(items) | PredicateExpr::Or(items) => {
                items.iter().for_each(|e| e.collect_attributes(out))
            }
        }
    }
}

fn compare(actual: &Value, op: CmpOp, expected: &Value) -> bool {
    match (actual, expected) {
        (Value::Number(a), Value::Number(b)) => match op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        },
        (Value::Bool(a), Value::Bool(b)) => match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            _ => false,
        },
        (Value::Level(a), Value::Level(b)) => match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            _ => false,
        },
        _ => false,
    }
}

fn fmt_literal(v: &Value, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        Value::Bool(b) => write!(f, "{b}"),
        // Rust's shortest round-trip representation keeps reparsing exact.
        Value::Number(x) => write!(f, "{x}"),
        Value::Level(l) if is_identifier(l) && !matches!(l.as_str(), "true" | "false" | "in") => {
            f.write_str(l)
        }
        Value::Level(l) => {
            f.write_str("\"")?;
            for c in l.chars() {
                if c == '"' || c == '\\' {
                    f.write_str("\\")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str("\"")
        }
    }
}

struct Grouped<'a>(&'a PredicateExpr, bool);

impl fmt::Display for Grouped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateExpr::Compare {
                attribute,
                op,
                value,
            } => {
                write!(f, "{attribute} {} ", op.symbol())?;
                fmt_literal(value, f)
            }
            PredicateExpr::Member { attribute, set } => {
                write!(f, "{attribute} in {{")?;
                for (i, v) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    fmt_literal(v, f)?;
                }
                f.write_str("}")
            }
            PredicateExpr::Test(attribute) => f.write_str(attribute),
            PredicateExpr::Not(inner) => {
                let group = matches!(**inner, PredicateExpr::And(_) | PredicateExpr::Or(_));
                write!(f, "!{}", Grouped(inner, group))
            }
            PredicateExpr::And(items) => {
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" && ")?;
                    }
                    let group = matches!(e, PredicateExpr::And(_) | PredicateExpr::Or(_));
                    write!(f, "{}", Grouped(e, group))?;
                }
                Ok(())
            }
            PredicateExpr::Or(items) => {
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" || ")?;
                    }
                    write!(f, "{}", Grouped(e, matches!(e, PredicateExpr::Or(_))))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Cmp(CmpOp),
    AndAnd,
    OrOr,
    Bang,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    In,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(x) => format!("number {x}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Bang => "`!`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::In => "`in`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PredicateError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let lexical = |position: usize, message: String| PredicateError::Lexical { position, message };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let two = |next: u8| bytes.get(i + 1) == Some(&next);
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'{' => Tok::LBrace,
            b'}' => Tok::RBrace,
            b',' => Tok::Comma,
            b'&' if two(b'&') => Tok::AndAnd,
            b'|' if two(b'|') => Tok::OrOr,
            b'=' if two(b'=') => Tok::Cmp(CmpOp::Eq),
            b'!' if two(b'=') => Tok::Cmp(CmpOp::Ne),
            b'<' if two(b'=') => Tok::Cmp(CmpOp::Le),
            b'>' if two(b'=') => Tok::Cmp(CmpOp::Ge),
            b'!' => Tok::Bang,
            b'<' => Tok::Cmp(CmpOp::Lt),
            b'>' => Tok::Cmp(CmpOp::Gt),
            b'"' => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut chars = text[j..].char_indices();
                loop {
                    match chars.next() {
                        None => return Err(lexical(start, "unterminated string".into())),
                        Some((k, '"')) => {
                            j += k + 1;
                            break;
                        }
                        Some((_, '\\')) => match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => s.push(e),
                            Some((k, other)) => {
                                return Err(lexical(j + k, format!("unknown escape `\\{other}`")))
                            }
                            None => return Err(lexical(start, "unterminated string".into())),
                        },
                        Some((_, ch)) => s.push(ch),
                    }
                }
                out.push((Tok::Str(s), start));
                i = j;
                continue;
            }
            b'0'..=b'9' | b'.' | b'-' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_digit()
                        || bytes[j] == b'.'
                        || bytes[j] == b'e'
                        || bytes[j] == b'E'
                        || ((bytes[j] == b'-' || bytes[j] == b'+')
                            && matches!(bytes[j - 1], b'e' | b'E')))
                {
                    j += 1;
                }
                let lit = &text[i..j];
                let x: f64 = lit
                    .parse()
                    .map_err(|_| lexical(start, format!("malformed number `{lit}`")))?;
                if !x.is_finite() {
                    return Err(lexical(start, format!("number `{lit}` is out of range")));
                }
                out.push((Tok::Number(x), start));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &text[i..j];
                out.push((
                    if word == "in" {
                        Tok::In
                    } else {
                        Tok::Ident(word.to_owned())
                    },
                    start,
                ));
                i = j;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(lexical(start, format!("unexpected character `{ch}`")));
            }
        };
        i += if matches!(
            tok,
            Tok::AndAnd | Tok::OrOr | Tok::Cmp(CmpOp::Eq | CmpOp::Ne | CmpOp::Le | CmpOp::Ge)
        ) {
            2
        } else {
            1
        };
        out.push((tok, start));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    schema: &'a AttributeSchema,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &(Tok, usize) {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> PredicateError {
        let (tok, position) = self.peek();
        PredicateError::Syntax {
            position: *position,
            message: format!("expected {expected}, found {}", tok.describe()),
        }
    }

    fn expr(&mut self) -> Result<PredicateExpr, PredicateError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(PredicateError::Syntax {
                position: self.peek().1,
                message: format!("nesting deeper than {MAX_DEPTH}"),
            });
        }
        let mut items = vec![self.and()?];
        while self.peek().0 == Tok::OrOr {
            self.bump();
            items.push(self.and()?);
        }
        self.depth -= 1;
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            PredicateExpr::Or(items)
        })
    }

    fn and(&mut self) -> Result<PredicateExpr, PredicateError> {
        let mut items = vec![self.unary()?];
        while self.peek().0 == Tok::AndAnd {
            self.bump();
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            PredicateExpr::And(items)
        })
    }

    fn unary(&mut self) -> Result<PredicateExpr, PredicateError> {
        match self.peek().0 {
            Tok::Bang => {
                self.bump();
                self.depth += 1;
                if self.depth > MAX_DEPTH {
                    return Err(PredicateError::Syntax {
                        position: self.peek().1,
                        message: format!("nesting deeper than {MAX_DEPTH}"),
                    });
                }
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(PredicateExpr::Not(Box::new(inner)))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if self.peek().0 != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<PredicateExpr, PredicateError> {
        let (tok, position) = self.peek().clone();
        let Tok::Ident(name) = tok else {
            return Err(self.unexpected("attribute name, `!` or `(`"));
        };
        self.bump();
        let def = self
            .schema
            .get(&name)
            .ok_or_else(|| PredicateError::UnknownAttribute {
                position,
                name: name.clone(),
            })?;
        match self.peek().0.clone() {
            Tok::Cmp(op) => {
                let op_pos = self.peek().1;
                self.bump();
                if op.is_ordering() && !def.kind.is_numeric() {
                    return Err(PredicateError::TypeMismatch {
                        position: op_pos,
                        message: format!(
                            "ordering comparison `{}` on {} attribute `{name}`",
                            op.symbol(),
                            def.kind
                        ),
                    });
                }
                let value = self.literal(&name, &def.kind)?;
                Ok(PredicateExpr::Compare {
                    attribute: name,
                    op,
                    value,
                })
            }
            Tok::In => {
                self.bump();
                if self.peek().0 != Tok::LBrace {
                    return Err(self.unexpected("`{`"));
                }
                self.bump();
                let mut set = vec![self.literal(&name, &def.kind)?];
                while self.peek().0 == Tok::Comma {
                    self.bump();
                    set.push(self.literal(&name, &def.kind)?);
                }
                if self.peek().0 != Tok::RBrace {
                    return Err(self.unexpected("`,` or `}`"));
                }
                self.bump();
                Ok(PredicateExpr::Member {
                    attribute: name,
                    set,
                })
            }
            _ => {
                if def.kind != AttributeKind::Boolean {
                    return Err(PredicateError::TypeMismatch {
                        position,
                        message: format!(
                            "bare `{name}` needs a boolean attribute, found {}",
                            def.kind
                        ),
                    });
                }
                Ok(PredicateExpr::Test(name))
            }
        }
    }

    fn literal(&mut self, name: &str, kind: &AttributeKind) -> Result<Value, PredicateError> {
        let (tok, position) = self.peek().clone();
        let value = match tok {
            Tok::Number(x) => Value::Number(x),
            Tok::Ident(w) if w == "true" => Value::Bool(true),
            Tok::Ident(w) if w == "false" => Value::Bool(false),
            Tok::Ident(w) | Tok::Str(w) => Value::Level(w),
            _ => return Err(self.unexpected("literal")),
        };
        self.bump();
        let mismatch = |message: String| PredicateError::TypeMismatch { position, message };
        match (kind, &value) {
            (k, Value::Number(_)) if k.is_numeric() => Ok(value),
            (AttributeKind::Boolean, Value::Bool(_)) => Ok(value),
            (AttributeKind::Categorical(levels), Value::Level(l)) => {
                if levels.contains(l) {
                    Ok(value)
                } else {
                    Err(mismatch(format!("`{l}` is not a level of `{name}`")))
                }
            }
            (k, v) => Err(mismatch(format!(
                "literal `{v}` does not match {k} attribute `{name}`"
            ))),
        }
    }
}

/// Parses and type-checks a predicate against `schema`.
pub fn parse_predicate(text: &str, schema: &AttributeSchema) -> Result<PredicateExpr, PredicateError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        schema,
        depth: 0,
    };
    let expr = parser.expr()?;
    if parser.peek().0 != Tok::Eof {
        return Err(parser.unexpected("`&&`, `||` or end of input"));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::schema::AttributeSchema;

    fn schema() -> AttributeSchema {
        AttributeSchema::from_json(include_str!("../../../../configs/attribute_schema.json"), "t")
            .unwrap()
    }

    fn cmp(attribute: &str, op: CmpOp, value: Value) -> PredicateExpr {
        PredicateExpr::Compare {
            attribute: attribute.into(),
            op,
            value,
        }
    }

    #[test]
    fn single_comparison() {
        let e = parse_predicate("child_labor_risk >= 0.5", &schema()).unwrap();
        assert_eq!(e, cmp("child_labor_risk", CmpOp::Ge, Value::Number(0.5)));
    }

    #[test]
    fn conjunction_with_negation() {
        let e = parse_predicate("deforestation_risk >= 0.5 && !shade_cert", &schema()).unwrap();
        assert_eq!(
            e,
            PredicateExpr::And(vec![
                cmp("deforestation_risk", CmpOp::Ge, Value::Number(0.5)),
                PredicateExpr::Not(Box::new(PredicateExpr::Test("shade_cert".into()))),
            ])
        );
    }

    #[test]
    fn categorical_equality() {
        let e = parse_predicate("decaf_process == solvent_risky", &schema()).unwrap();
        assert_eq!(
            e,
            cmp("decaf_process", CmpOp::Eq, Value::Level("solvent_risky".into()))
        );
    }

    #[test]
    fn truncated_input_reports_position() {
        let err = parse_predicate("price <", &schema()).unwrap_err();
        assert!(matches!(err, PredicateError::Syntax { position: 7, .. }), "{err}");
    }

    #[test]
    fn precedence_and_membership() {
        let e = parse_predicate(
            "transparency <= 0.3 || recyclable == false && packaging_type in {pod, tin}",
            &schema(),
        )
        .unwrap();
        let PredicateExpr::Or(items) = &e else {
            panic!("expected disjunction, got {e:?}")
        };
        assert!(matches!(&items[1], PredicateExpr::And(v) if v.len() == 2));
    }

    #[test]
    fn type_errors() {
        let s = schema();
        let err = parse_predicate("decaf_process < water", &s).unwrap_err();
        assert!(matches!(err, PredicateError::TypeMismatch { position: 14, .. }));
        let err = parse_predicate("price == cheap", &s).unwrap_err();
        assert!(matches!(err, PredicateError::TypeMismatch { position: 9, .. }));
        let err = parse_predicate("decaf_process == decaf", &s).unwrap_err();
        assert!(matches!(err, PredicateError::TypeMismatch { .. }));
        let err = parse_predicate("price", &s).unwrap_err();
        assert!(matches!(err, PredicateError::TypeMismatch { position: 0, .. }));
        let err = parse_predicate("colour == red", &s).unwrap_err();
        assert_eq!(
            err,
            PredicateError::UnknownAttribute {
                position: 0,
                name: "colour".into()
            }
        );
    }

    #[test]
    fn lexical_errors() {
        let err = parse_predicate("price < 0.5 & carbon > 1", &schema()).unwrap_err();
        assert!(matches!(err, PredicateError::Lexical { position: 12, .. }));
        let err = parse_predicate("decaf_process == \"water", &schema()).unwrap_err();
        assert!(matches!(err, PredicateError::Lexical { position: 17, .. }));
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let text = format!("{}shade_cert{}", "(".repeat(500), ")".repeat(500));
        assert!(matches!(
            parse_predicate(&text, &schema()),
            Err(PredicateError::Syntax { .. })
        ));
        let bangs = format!("{}shade_cert", "!".repeat(500));
        assert!(parse_predicate(&bangs, &schema()).is_err());
    }

    #[test]
    fn display_keeps_structure() {
        let s = schema();
        for text in [
            "(shade_cert && vegan_cert) && recyclable",
            "!(price > 1 || carbon < 2)",
            "decaf_process in {none, \"co2\"} || !!shade_cert",
            "price >= -0.25 && (water == 3 || carbon != 1e-3)",
        ] {
            let e = parse_predicate(text, &s).unwrap();
            let again = parse_predicate(&e.to_string(), &s).unwrap();
            assert_eq!(e, again, "{text} -> {e}");
        }
    }

    #[test]
    fn evaluation() {
        let s = schema();
        let e = parse_predicate("deforestation_risk >= 0.5 && !shade_cert", &s).unwrap();
        let mut values = BTreeMap::new();
        values.insert("deforestation_risk".to_owned(), Value::Number(0.6));
        values.insert("shade_cert".to_owned(), Value::Bool(false));
        assert!(e.eval(&values));
        values.insert("shade_cert".to_owned(), Value::Bool(true));
        assert!(!e.eval(&values));
        assert_eq!(e.attributes(), ["deforestation_risk", "shade_cert"]);
    }
}
