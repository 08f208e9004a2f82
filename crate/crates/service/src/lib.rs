//! HTTP+JSON service for the interactive shopping game.
//!
//! | method | path                              | purpose                          |
//! |--------|-----------------------------------|----------------------------------|
//! | POST   | `/sessions`                       | start a session                  |
//! | GET    | `/sessions/{id}`                  | session snapshot                 |
//! | GET    | `/sessions/{id}/rounds/{n}`       | options and explanations         |
//! | POST   | `/sessions/{id}/rounds/{n}/pick`  | submit a pick                    |
//! | PATCH  | `/sessions/{id}/weights`          | retune weights for unseen rounds |
//! | GET    | `/sessions/{id}/summary`          | metrics over picked rounds       |
//!
//! Sessions live in memory. Every accepted pick is appended to `play_log.csv`.

pub mod error;
pub mod playlog;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use ethicup_core::config::{Condition, ConfigBundle, WeightConfig};
use ethicup_core::replay::SessionSummary;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub use error::ApiError;
pub use playlog::PlayLog;
pub use session::{RoundView, Session, SessionView};

/// Seeds drawn from entropy stay below 2^53 so JSON clients echo them exactly.
const ENTROPY_SEED_BITS: u32 = 53;

pub struct AppState {
    pub bundle: ConfigBundle,
    pub hard_budget: bool,
    log: PlayLog,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(bundle: ConfigBundle, log: PlayLog, hard_budget: bool) -> Self {
        AppState {
            bundle,
            hard_budget,
            log,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn log(&self) -> &PlayLog {
        &self.log
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rounds/{n}", get(get_round))
        .route("/sessions/{id}/rounds/{n}/pick", post(submit_pick))
        .route("/sessions/{id}/weights", patch(update_weights))
        .route("/sessions/{id}/summary", get(get_summary))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn lock(session: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|p| p.into_inner())
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn round_number(raw: &str) -> Result<u32, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::NotFound(format!("round `{raw}` does not exist")))
}

fn parse_weights(raw: &BTreeMap<String, f64>, bundle: &ConfigBundle) -> Result<WeightConfig, ApiError> {
    WeightConfig::from_criteria("session", raw, &bundle.schema).map_err(|issues| {
        let criteria = bundle.welfare_weights().criteria.keys().cloned().collect();
        ApiError::BadRequest {
            message: "invalid weights".into(),
            allowed: criteria,
            issues: issues.iter().map(|i| format!("{}: {}", i.field, i.message)).collect(),
        }
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub condition: String,
    pub seed: Option<u64>,
    /// Criterion → weight; renormalized.
    pub weights: Option<BTreeMap<String, f64>>,
}

async fn create_session(
    State(state): State<Shared>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req = body(payload)?;
    let condition: Condition = req.condition.parse().map_err(|message: String| ApiError::BadRequest {
        message,
        allowed: Condition::ALL.iter().map(|c| c.as_str().to_owned()).collect(),
        issues: Vec::new(),
    })?;
    let weights = req.weights.as_ref().map(|w| parse_weights(w, &state.bundle)).transpose()?;
    let seed = req
        .seed
        .unwrap_or_else(|| rand::random::<u64>() >> (64 - ENTROPY_SEED_BITS));
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id.clone(), seed, condition, weights, &state.bundle)
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let view = session.view(state.hard_budget);
    state
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = state.session(&id)?;
    let view = lock(&session).view(state.hard_budget);
    Ok(Json(view))
}

async fn get_round(
    State(state): State<Shared>,
    Path((id, n)): Path<(String, String)>,
) -> Result<Json<RoundView>, ApiError> {
    let session = state.session(&id)?;
    let n = round_number(&n)?;
    let view = lock(&session).round_view(n, &state.bundle, state.hard_budget)?;
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickRequest {
    pub option_id: String,
}

#[derive(Debug, Serialize)]
pub struct PickResponse {
    pub accepted: AcceptedPick,
    pub session: SessionView,
}

#[derive(Debug, Serialize)]
pub struct AcceptedPick {
    pub round: u32,
    pub option_id: String,
    pub recommended_option: String,
    pub followed_recommendation: bool,
    pub budget_remaining: f64,
}

async fn submit_pick(
    State(state): State<Shared>,
    Path((id, n)): Path<(String, String)>,
    payload: Result<Json<PickRequest>, JsonRejection>,
) -> Result<Json<PickResponse>, ApiError> {
    let session = state.session(&id)?;
    let n = round_number(&n)?;
    let req = body(payload)?;
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let mut guard = lock(&session);
    let record = guard.pick(n, &req.option_id, &state.bundle, state.hard_budget, now, |r| {
        state.log.append(r)
    })?;
    Ok(Json(PickResponse {
        accepted: AcceptedPick {
            round: record.round,
            option_id: record.option_id,
            recommended_option: record.recommended_option,
            followed_recommendation: record.followed_recommendation,
            budget_remaining: record.budget_remaining,
        },
        session: guard.view(state.hard_budget),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsRequest {
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct WeightsAck {
    pub session_id: String,
    pub weights: BTreeMap<String, f64>,
    /// First round scored with the new weights.
    pub applies_from_round: u32,
}

async fn update_weights(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<WeightsRequest>, JsonRejection>,
) -> Result<Json<WeightsAck>, ApiError> {
    let session = state.session(&id)?;
    let req = body(payload)?;
    let weights = parse_weights(&req.weights, &state.bundle)?;
    let mut guard = lock(&session);
    let applies_from_round = guard.set_weights(weights);
    Ok(Json(WeightsAck {
        session_id: id,
        weights: guard.weights().criteria.clone(),
        applies_from_round,
    }))
}

async fn get_summary(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionSummary>, ApiError> {
    let session = state.session(&id)?;
    let summary = lock(&session).summary();
    Ok(Json(summary))
}
