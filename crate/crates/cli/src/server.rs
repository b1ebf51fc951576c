//! HTTP front end of the annotation store.
//!
//! One mutex serializes access to the store, so label writes have a single
//! writer and each acknowledgment follows its fsync.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hatespeech::annotation::{ExportStrategy, LabelSubmission, ProjectStore};
use hatespeech::corpus::write_csv;
use hatespeech::Error;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::error::CliError;

const PLACEHOLDER: &str = include_str!("../static/index.html");

pub type Shared = Arc<Mutex<ProjectStore>>;

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) | Error::UnknownAnnotator(_) => StatusCode::NOT_FOUND,
            Error::Validation { .. } => StatusCode::BAD_REQUEST,
            Error::NoOverlap(..) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &self.0 {
            Error::Validation { field, .. } => Some(field.clone()),
            _ => None,
        };
        (status, Json(json!({ "error": self.0.to_string(), "field": field }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn lock(store: &Shared) -> std::sync::MutexGuard<'_, ProjectStore> {
    // a panic mid-request cannot leave the store half-applied, since
    // state only changes after the write has succeeded
    store.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_task(State(store): State<Shared>, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    Ok(match lock(&store).next_task(&q.annotator)? {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit_label(State(store): State<Shared>, Json(sub): Json<LabelSubmission>) -> ApiResult<Response> {
    let ack = tokio::task::spawn_blocking(move || lock(&store).submit(&sub))
        .await
        .map_err(|e| ApiError(Error::Config(format!("label writer failed: {e}"))))??;
    Ok(Json(ack).into_response())
}

#[derive(Deserialize)]
struct PairQuery {
    a: String,
    b: String,
}

async fn agreement(State(store): State<Shared>, Query(q): Query<PairQuery>) -> ApiResult<Response> {
    let r = lock(&store).agreement(&q.a, &q.b)?;
    Ok(Json(r).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    strategy: String,
}

async fn export(State(store): State<Shared>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let strategy: ExportStrategy = q.strategy.parse()?;
    let out = lock(&store).export(strategy)?;
    let mut body = Vec::new();
    write_csv(&out.dataset, &mut body)?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::HeaderName::from_static("x-excluded-count"), out.excluded.to_string()),
        ],
        body,
    )
        .into_response())
}

async fn stats(State(store): State<Shared>) -> Response {
    Json(lock(&store).stats()).into_response()
}

#[derive(Deserialize)]
struct Register {
    annotator_id: String,
}

async fn register(State(store): State<Shared>, Json(r): Json<Register>) -> ApiResult<Response> {
    let created = lock(&store).register(&r.annotator_id)?;
    Ok(Json(json!({ "annotator_id": r.annotator_id.trim(), "registered": created })).into_response())
}

async fn annotators(State(store): State<Shared>) -> Response {
    let ids: Vec<String> = lock(&store).annotators().map(String::from).collect();
    Json(ids).into_response()
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

/// The API under `/api`, static files everywhere else.
pub fn router(store: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/labels", post(submit_label))
        .route("/api/agreement", get(agreement))
        .route("/api/export", get(export))
        .route("/api/stats", get(stats))
        .route("/api/annotators", get(annotators).post(register))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.route("/", get(placeholder)),
    }
}

/// Binds, prints the bound address on stdout and serves until ctrl-c.
pub async fn serve(store: ProjectStore, addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Runtime(format!("cannot listen on {addr}: {e}")))?;
    let bound = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    let path = store.path().display().to_string();
    println!("listening on http://{bound} (project {path})");
    use std::io::Write;
    let _ = std::io::stdout().flush();
    let app = router(Arc::new(Mutex::new(store)), static_dir);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Runtime(e.to_string()))
}
