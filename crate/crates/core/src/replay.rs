//! Play-log records and offline recomputation of session metrics.
//!
//! The interactive service appends one [`PlayLogRecord`] per accepted pick.
//! [`replay_log`] regenerates each session's pool from its seed and rebuilds
//! the same [`SessionSummary`] the service reports.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::config::{Condition, ConfigBundle};
use crate::error::{Error, Result};
use crate::harness::{Decision, RoundEvaluation};
use crate::numfmt::fmt_real;
use crate::scenario::{csv_writer, generate_pool, Scenario};

pub const PLAY_LOG_FILE: &str = "play_log.csv";

pub const PLAY_LOG_COLUMNS: [&str; 9] = [
    "session_id",
    "timestamp",
    "round",
    "option_id",
    "condition",
    "recommended_option",
    "followed_recommendation",
    "budget_remaining",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayLogRecord {
    pub session_id: String,
    /// RFC 3339.
    pub timestamp: String,
    pub round: u32,
    pub option_id: String,
    pub condition: Condition,
    pub recommended_option: String,
    pub followed_recommendation: bool,
    pub budget_remaining: f64,
    pub seed: u64,
}

impl PlayLogRecord {
    fn cells(&self) -> [String; 9] {
        [
            self.session_id.clone(),
            self.timestamp.clone(),
            self.round.to_string(),
            self.option_id.clone(),
            self.condition.to_string(),
            self.recommended_option.clone(),
            self.followed_recommendation.to_string(),
            fmt_real(self.budget_remaining),
            self.seed.to_string(),
        ]
    }

    /// One CSV line including the trailing LF, suitable for a single append.
    pub fn to_csv_line(&self) -> String {
        csv_line(&self.cells())
    }
}

fn csv_line(cells: &[String]) -> String {
    let mut w = csv_writer(Vec::new());
    w.write_record(cells).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 cells")
}

pub fn play_log_header() -> String {
    csv_line(&PLAY_LOG_COLUMNS.map(String::from))
}

pub fn read_play_log<R: Read>(input: R, origin: &str) -> Result<Vec<PlayLogRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            origin: origin.to_owned(),
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().collect::<Vec<_>>() != PLAY_LOG_COLUMNS {
        return Err(Error::Row {
            origin: origin.to_owned(),
            line: 1,
            message: format!("expected header {}", PLAY_LOG_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Row {
            origin: origin.to_owned(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row {
            origin: origin.to_owned(),
            line,
            message,
        };
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| row_err(format!("`{}` is not a number in `{}`", field(i), PLAY_LOG_COLUMNS[i])))
        };
        out.push(PlayLogRecord {
            session_id: field(0).to_owned(),
            timestamp: field(1).to_owned(),
            round: field(2)
                .parse()
                .ok()
                .filter(|r| *r >= 1)
                .ok_or_else(|| row_err(format!("`{}` is not a valid round", field(2))))?,
            option_id: field(3).to_owned(),
            condition: field(4).parse().map_err(row_err)?,
            recommended_option: field(5).to_owned(),
            followed_recommendation: field(6)
                .parse()
                .map_err(|_| row_err(format!("`{}` is not a boolean", field(6))))?,
            budget_remaining: parse_num(7)?,
            seed: field(8)
                .parse()
                .map_err(|_| row_err(format!("`{}` is not a seed", field(8))))?,
        });
        if out.last().is_some_and(|r| r.session_id.is_empty() || r.option_id.is_empty()) {
            return Err(row_err("empty session_id or option_id".into()));
        }
    }
    Ok(out)
}

pub fn load_play_log(path: impl AsRef<Path>) -> Result<Vec<PlayLogRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_play_log(std::io::BufReader::new(file), &path.display().to_string())
}

/// Per-session metrics computed with the harness formulas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub condition: Condition,
    pub seed: u64,
    pub rounds_picked: usize,
    pub decisions: Vec<Decision>,
    pub mean_welfare_uplift: f64,
    pub violation_free_share: f64,
    pub mean_severity: f64,
    pub followed_share: f64,
    pub budget_remaining: f64,
}

impl SessionSummary {
    /// Empty sessions report zero for every mean.
    pub fn new(
        session_id: &str,
        condition: Condition,
        seed: u64,
        initial_budget: f64,
        decisions: Vec<Decision>,
        followed: &[bool],
    ) -> Self {
        let n = decisions.len();
        let mean = |sum: f64| if n == 0 { 0.0 } else { sum / n as f64 };
        SessionSummary {
            session_id: session_id.to_owned(),
            condition,
            seed,
            rounds_picked: n,
            mean_welfare_uplift: mean(decisions.iter().map(|d| d.welfare_uplift).sum()),
            violation_free_share: mean(decisions.iter().filter(|d| d.clean).count() as f64),
            mean_severity: mean(decisions.iter().map(|d| d.severity).sum()),
            followed_share: mean(followed.iter().filter(|f| **f).count() as f64),
            budget_remaining: decisions.iter().fold(initial_budget, |b, d| b - d.price),
            decisions,
        }
    }
}

/// The scenario pool a session with `seed` plays through.
pub fn session_pool(bundle: &ConfigBundle, seed: u64) -> Result<Vec<Scenario>> {
    let mut config = bundle.experiment.clone();
    config.seed = seed;
    generate_pool(&config, &bundle.schema, &bundle.rules, &bundle.cert_map)
}

/// Rebuilds every logged session's summary, in order of first appearance.
pub fn replay_log(records: &[PlayLogRecord], bundle: &ConfigBundle) -> Result<Vec<SessionSummary>> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.session_id.as_str()) {
            order.push(&r.session_id);
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for session_id in order {
        let picks: Vec<&PlayLogRecord> = records.iter().filter(|r| r.session_id == session_id).collect();
        let first = picks[0];
        let pool = session_pool(bundle, first.seed)?;
        let mut decisions = Vec::with_capacity(picks.len());
        let mut followed = Vec::with_capacity(picks.len());
        for (i, pick) in picks.iter().enumerate() {
            let bad = |message: String| Error::Row {
                origin: PLAY_LOG_FILE.into(),
                line: 0,
                message: format!("session {session_id}: {message}"),
            };
            if pick.round as usize != i + 1 {
                return Err(bad(format!("expected round {}, found {}", i + 1, pick.round)));
            }
            let scenario = pool
                .get(i)
                .ok_or_else(|| bad(format!("round {} beyond the session's pool", pick.round)))?;
            if scenario.option(&pick.option_id).is_none() {
                return Err(bad(format!("unknown option `{}` in round {}", pick.option_id, pick.round)));
            }
            let eval = RoundEvaluation::new(scenario, bundle);
            decisions.push(eval.decision(first.condition, &pick.option_id, false));
            followed.push(pick.followed_recommendation);
        }
        out.push(SessionSummary::new(
            session_id,
            first.condition,
            first.seed,
            bundle.experiment.initial_budget,
            decisions,
            &followed,
        ));
    }
    Ok(out)
}
