//! HTTP/JSON interface over one shared [`Engine`].

use std::collections::BTreeMap;
use std::fs;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;

use crisisflow_core::analysis::{check_soundness, SoundnessReport};
use crisisflow_core::corpus::builtin_plan;
use crisisflow_core::engine::{Action, CaseId, CaseStatus, Engine, EngineError, WorkItemId};
use crisisflow_core::eventlog::{project_completions, write_csv, write_xes, EventLog};
use crisisflow_core::mining::{alpha_discover, degree_stats, footprint, handover_network, token_replay, MiningError};

use crate::config::{ConfigError, ServiceConfig};

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<Engine>>,
    soundness: Arc<BTreeMap<String, Result<SoundnessReport, String>>>,
    log_dir: Option<PathBuf>,
}

impl AppState {
    /// Engine preloaded with the built-in plan and the configured plan
    /// directory; soundness of every plan is checked once here.
    pub fn new(config: &ServiceConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut plans = vec![builtin_plan()];
        plans.extend(config.load_plans()?);
        let mut engine = Engine::new();
        let mut soundness = BTreeMap::new();
        for plan in plans {
            let id = plan.id.clone();
            match engine.register_plan(plan) {
                Ok(loaded) => {
                    let report = check_soundness(&loaded.net, config.state_space_cap).map_err(|e| e.to_string());
                    soundness.insert(id, report);
                }
                Err(e) => {
                    return Err(ConfigError::Plan {
                        id,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(Self {
            engine: Arc::new(Mutex::new(engine)),
            soundness: Arc::new(soundness),
            log_dir: config.log_dir.clone(),
        })
    }

    fn engine(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error("cannot write case log: {0}")]
    Export(String),
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str) {
        match self {
            ApiError::Malformed(_) => (StatusCode::BAD_REQUEST, "malformed_request"),
            ApiError::Mining(_) => (StatusCode::BAD_REQUEST, "mining_error"),
            ApiError::Export(_) => (StatusCode::INTERNAL_SERVER_ERROR, "export_failed"),
            ApiError::Engine(e) => match e {
                EngineError::UnknownPlan(_) => (StatusCode::NOT_FOUND, "unknown_plan"),
                EngineError::UnknownCase(_) => (StatusCode::NOT_FOUND, "unknown_case"),
                EngineError::UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown_item"),
                EngineError::UnknownRole(_) => (StatusCode::NOT_FOUND, "unknown_role"),
                EngineError::IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_transition"),
                EngineError::StaleItem(_) => (StatusCode::CONFLICT, "stale_item"),
                EngineError::RoleMismatch { .. } => (StatusCode::CONFLICT, "role_mismatch"),
                EngineError::ActorMismatch { .. } => (StatusCode::CONFLICT, "actor_mismatch"),
                EngineError::InvalidPlan(_) | EngineError::Compile(_) => (StatusCode::BAD_REQUEST, "invalid_plan"),
                EngineError::Deadlock { .. } | EngineError::NonCompletion { .. } => {
                    (StatusCode::CONFLICT, "non_completion")
                }
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.parts();
        (status, Json(json!({ "error": code, "message": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

fn parse_id(raw: &str, what: &str) -> ApiResult<u64> {
    raw.parse()
        .map_err(|_| ApiError::Malformed(format!("{what} id must be a non-negative integer, got {raw:?}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/plans", get(list_plans))
        .route("/api/plans/{id}", get(get_plan))
        .route("/api/cases", get(list_cases).post(create_case))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/cases/{id}/log", get(case_log))
        .route("/api/roles/{role}/worklist", get(worklist))
        .route("/api/workitems/{id}/act", post(act))
        .route("/api/mine/alpha", post(mine_alpha))
        .route("/api/mine/handover", post(mine_handover))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_on<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Loads plans, binds the configured address and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = AppState::new(&config)?;
    let addr = config.addr();
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    eprintln!("listening on {}", listener.local_addr()?);
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let engine = state.engine();
    Json(json!({
        "status": "ok",
        "plans": engine.plans().count(),
        "cases": engine.cases().count(),
    }))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PlanSummary {
    id: String,
    roles: usize,
    tasks: usize,
    sound: Option<bool>,
}

async fn list_plans(State(state): State<AppState>) -> Json<Vec<PlanSummary>> {
    let engine = state.engine();
    Json(
        engine
            .plans()
            .map(|p| PlanSummary {
                id: p.plan.id.clone(),
                roles: p.plan.roles.len(),
                tasks: p.plan.tasks.len(),
                sound: state.soundness.get(&p.plan.id).and_then(|r| r.as_ref().ok()).map(|r| r.sound),
            })
            .collect(),
    )
}

async fn get_plan(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let engine = state.engine();
    let loaded = engine.plan(&id).ok_or_else(|| EngineError::UnknownPlan(id.clone()))?;
    let soundness = match state.soundness.get(&id) {
        Some(Ok(report)) => json!(report),
        Some(Err(message)) => json!({ "error": message }),
        None => Value::Null,
    };
    Ok(Json(json!({ "plan": loaded.plan, "soundness": soundness })))
}

#[derive(Deserialize)]
struct CreateCase {
    plan: String,
}

async fn create_case(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateCase = parse_body(&body)?;
    let mut engine = state.engine();
    let id = engine.create_case(&req.plan)?;
    let snapshot = engine.case_state(id)?;
    Ok((StatusCode::CREATED, Json(json!(snapshot))))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CaseSummary {
    id: CaseId,
    plan_id: String,
    status: CaseStatus,
    event_count: usize,
}

async fn list_cases(State(state): State<AppState>) -> Json<Vec<CaseSummary>> {
    let engine = state.engine();
    Json(
        engine
            .cases()
            .map(|c| CaseSummary {
                id: c.id,
                plan_id: c.plan_id.clone(),
                status: c.status,
                event_count: c.events.len(),
            })
            .collect(),
    )
}

async fn get_case(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = CaseId(parse_id(&id, "case")?);
    let snapshot = state.engine().case_state(id)?;
    Ok(Json(json!(snapshot)))
}

#[derive(Deserialize)]
struct LogQuery {
    format: Option<String>,
}

async fn case_log(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<LogQuery>,
) -> ApiResult<Response> {
    let id = CaseId(parse_id(&id, "case")?);
    let log = state.engine().log_of(&[id])?;
    match q.format.as_deref().unwrap_or("csv") {
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], write_csv(&log)).into_response()),
        "xes" => Ok(([(header::CONTENT_TYPE, "application/xml; charset=utf-8")], write_xes(&log)).into_response()),
        other => Err(ApiError::Malformed(format!("format must be csv or xes, got {other:?}"))),
    }
}

async fn worklist(State(state): State<AppState>, Path(role): Path<String>) -> ApiResult<Json<Value>> {
    let items = state.engine().worklist(&role)?;
    Ok(Json(json!(items)))
}

#[derive(Deserialize)]
struct ActRequest {
    action: Action,
    actor: String,
}

async fn act(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let id = WorkItemId(parse_id(&id, "work item")?);
    let req: ActRequest = parse_body(&body)?;
    let (item, finished) = {
        let mut engine = state.engine();
        let item = engine.act(id, req.action, &req.actor)?;
        let case = engine.case(item.case_id)?;
        let finished = (case.status == CaseStatus::Completed && req.action != Action::Allocate)
            .then(|| engine.log_of(&[item.case_id]))
            .transpose()?;
        (item, finished)
    };
    if let (Some(dir), Some(log)) = (&state.log_dir, finished) {
        let path = dir.join(format!("case-{}.csv", item.case_id));
        fs::write(&path, write_csv(&log)).map_err(|e| ApiError::Export(format!("{}: {e}", path.display())))?;
    }
    Ok(Json(json!(item)))
}

#[derive(Deserialize)]
struct MineRequest {
    cases: Vec<u64>,
    #[serde(default, rename = "includeSelfLoops")]
    include_self_loops: bool,
}

/// Copies the requested logs out under the lock; mining runs without it.
fn snapshot_logs(state: &AppState, body: &Bytes) -> ApiResult<(EventLog, bool)> {
    let req: MineRequest = parse_body(body)?;
    let ids: Vec<CaseId> = req.cases.into_iter().map(CaseId).collect();
    let log = state.engine().log_of(&ids)?;
    Ok((log, req.include_self_loops))
}

async fn mine_alpha(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let (log, _) = snapshot_logs(&state, &body)?;
    let traces = project_completions(&log);
    let net = alpha_discover(&traces)?;
    let fitness = token_replay(&net, &traces);
    let fp = footprint(&traces);
    let relations: Vec<Value> = fp
        .pairs()
        .map(|(a, b, r)| json!({ "from": a, "to": b, "relation": r }))
        .collect();
    Ok(Json(json!({
        "net": net,
        "fitness": fitness,
        "footprint": { "activities": fp.activities, "relations": relations },
    })))
}

async fn mine_handover(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let (log, include_self_loops) = snapshot_logs(&state, &body)?;
    let g = handover_network(&log)?;
    let edges: Vec<Value> = g
        .edges
        .iter()
        .filter(|((a, b), _)| include_self_loops || a != b)
        .map(|((a, b), w)| json!({ "from": a, "to": b, "weight": w }))
        .collect();
    Ok(Json(json!({
        "nodes": g.nodes,
        "edges": edges,
        "degrees": degree_stats(&g, include_self_loops),
        "dot": g.to_dot(include_self_loops),
    })))
}
