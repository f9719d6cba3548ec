//! HTTP+JSON front of the experiment service.

use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use npiprobe_core::contrast::Alternative;
use npiprobe_core::experiment::{Choice, ItemId, NextItem};

use crate::error::Error;
use crate::journal::Service;

pub const ADMIN_HEADER: &str = "x-admin-token";

pub struct AppState {
    pub service: Mutex<Service>,
    /// `None` disables the admin routes.
    pub admin_token: Option<String>,
    pub static_dir: Option<PathBuf>,
    pub alternative: Alternative,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl ToString) -> ApiError {
        ApiError {
            status,
            code,
            detail: detail.to_string(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        let code = e.code();
        let status = match code {
            "argument" | "format" => StatusCode::BAD_REQUEST,
            "not_found" => StatusCode::NOT_FOUND,
            "conflict" | "state" | "sequencing" => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, code, e)
    }
}

impl From<npiprobe_core::Error> for ApiError {
    fn from(e: npiprobe_core::Error) -> ApiError {
        Error::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "detail": self.detail }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "argument", e))
}

/// Runs a mutating command off the async workers: it fsyncs the journal.
async fn with_service<T: Send + 'static>(
    state: &Arc<AppState>,
    f: impl FnOnce(&mut Service) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut svc = state.service.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut svc)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
}

#[derive(Deserialize)]
struct CreateBody {
    #[serde(default)]
    participant_id: Option<String>,
}

async fn create_session(State(state): State<Arc<AppState>>, raw: Bytes) -> ApiResult {
    let req: CreateBody = body(&raw)?;
    let (id, items) = with_service(&state, move |svc| Ok(svc.create_session(req.participant_id.as_deref())?)).await?;
    Ok(Json(json!({ "session_id": id, "phase": "qualification", "items": items })))
}

#[derive(Deserialize)]
struct QualificationBody {
    answers: Vec<String>,
}

fn parse_choice(s: &str) -> Result<Choice, ApiError> {
    Ok(s.parse::<Choice>()?)
}

async fn qualification(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, raw: Bytes) -> ApiResult {
    let req: QualificationBody = body(&raw)?;
    let answers = req.answers.iter().map(|a| parse_choice(a)).collect::<Result<Vec<_>, _>>()?;
    let passed = with_service(&state, move |svc| Ok(svc.grade_qualification(&id, &answers)?)).await?;
    Ok(Json(json!({ "result": if passed { "pass" } else { "fail" } })))
}

fn progress(svc: &Service, id: &str) -> Result<Value, ApiError> {
    let s = svc.experiment().session(id)?;
    Ok(json!({ "answered": s.judgments.len(), "total": s.schedule.len() }))
}

async fn next_item(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let svc = state.service.lock().unwrap_or_else(|p| p.into_inner());
    match svc.next_item(&id)? {
        NextItem::Done => Ok(Json(json!({ "done": true }))),
        NextItem::Item(item) => Ok(Json(json!({
            "item_id": item.item_id,
            "first": item.first,
            "second": item.second,
            "progress": progress(&svc, &id)?,
        }))),
    }
}

#[derive(Deserialize)]
struct JudgmentBody {
    item_id: String,
    choice: String,
}

async fn judgment(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, raw: Bytes) -> ApiResult {
    let req: JudgmentBody = body(&raw)?;
    let item: ItemId = req.item_id.parse()?;
    let choice = parse_choice(&req.choice)?;
    let ack = with_service(&state, move |svc| Ok(svc.record_judgment(&id, item, choice)?)).await?;
    Ok(Json(json!({ "ok": true, "progress": { "answered": ack.answered, "total": ack.total } })))
}

async fn analysis(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult {
    let Some(expected) = &state.admin_token else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "admin routes are disabled"));
    };
    let given = headers.get(ADMIN_HEADER).and_then(|v| v.to_str().ok());
    if given != Some(expected.as_str()) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong admin token"));
    }
    let svc = state.service.lock().unwrap_or_else(|p| p.into_inner());
    Ok(Json(serde_json::to_value(svc.analysis(state.alternative)).expect("rows serialize")))
}

const PLACEHOLDER: &str = "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>npiprobe</title></head>\n<body><p>The participant interface is not installed. Start the server with <code>--static DIR</code>.</p></body>\n</html>\n";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn static_file(state: &AppState, rel: &str) -> Response {
    let Some(dir) = &state.static_dir else {
        return if rel.is_empty() {
            ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER).into_response()
        } else {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", rel).into_response()
        };
    };
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel_path = Path::new(rel);
    if rel_path.components().any(|c| !matches!(c, Component::Normal(_))) {
        return ApiError::new(StatusCode::NOT_FOUND, "not_found", rel).into_response();
    }
    let path = dir.join(rel_path);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", rel).into_response(),
    }
}

async fn index(State(state): State<Arc<AppState>>) -> Response {
    static_file(&state, "").await
}

async fn asset(State(state): State<Arc<AppState>>, UrlPath(rel): UrlPath<String>) -> Response {
    static_file(&state, &rel).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/qualification", post(qualification))
        .route("/api/sessions/{id}/next", get(next_item))
        .route("/api/sessions/{id}/judgments", post(judgment))
        .route("/api/admin/analysis", get(analysis))
        .route("/", get(index))
        .route("/{*path}", get(asset))
        .with_state(state)
}

/// Serves until ctrl-c, then writes a final snapshot.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> crate::error::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Error::Config(e.to_string()))?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Config(format!("server error: {e}")))?;
    let mut svc = state.service.lock().unwrap_or_else(|p| p.into_inner());
    svc.snapshot()
}
