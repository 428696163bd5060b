//! HTTP handlers under `/api`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use busfactor_core::engine::{self, EngineError};
use busfactor_core::knowledge::KnowledgeMatrix;
use busfactor_core::store::{ArtifactDir, StoreError, MATRIX_JSON, TREE_CSV, TREE_JSON};
use busfactor_core::tree::RepoTree;
use busfactor_core::{export, RepoCoordinates};
use busfactor_github::ProviderError;
use serde::Deserialize;
use serde_json::json;

use crate::jobs::{QueueFull, Submitted};
use crate::AppState;

pub const DEFAULT_SEARCH_LIMIT: usize = 10;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/jobs", post(submit_job).get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/log", get(job_log))
        .route("/repos", get(list_repos))
        .route("/repos/{owner}/{name}/tree", get(tree_json))
        .route("/repos/{owner}/{name}/export.csv", get(tree_csv))
        .route("/repos/{owner}/{name}/simulate", post(simulate))
        .route("/search", get(search))
        .with_state(state)
}

pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
struct JobRequest {
    owner: String,
    name: String,
}

async fn submit_job(
    State(state): State<Arc<AppState>>,
    body: Result<Json<JobRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let url = state.config.clone_url(&req.owner, &req.name);
    let coords = RepoCoordinates::new(&req.owner, &req.name, url)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    match state.jobs.submit(coords) {
        Ok(submitted) => {
            let created = matches!(submitted, Submitted::New(_));
            let body = json!({ "jobId": submitted.id(), "created": created });
            Ok((StatusCode::ACCEPTED, Json(body)).into_response())
        }
        Err(QueueFull) => Err(ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            format!("job queue is full ({} pending)", state.config.queue_cap),
        )),
    }
}

async fn list_jobs(State(state): State<Arc<AppState>>) -> Response {
    Json(state.jobs.list()).into_response()
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    state
        .jobs
        .get(&id)
        .map(|job| Json(job).into_response())
        .ok_or_else(|| unknown_job(&id))
}

fn unknown_job(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("unknown job {id}"))
}

#[derive(Deserialize)]
struct LogQuery {
    #[serde(default)]
    from: usize,
}

async fn job_log(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<LogQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let slice = state.jobs.log_from(&id, q.from).ok_or_else(|| unknown_job(&id))?;
    Ok(Json(json!({
        "jobId": id,
        "state": slice.state,
        "from": q.from,
        "next": slice.next,
        "lines": slice.lines,
    }))
    .into_response())
}

async fn list_repos(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let store = state.store.clone();
    let metas = tokio::task::spawn_blocking(move || store.list())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let repos: Vec<_> = metas
        .into_iter()
        .map(|m| {
            json!({
                "owner": m.owner,
                "name": m.name,
                "busFactor": m.root_bus_factor,
                "referenceTime": m.reference_time,
                "nodeCount": m.node_count,
            })
        })
        .collect();
    Ok(Json(repos).into_response())
}

/// Artifact directory of an analyzed repository, or 404.
fn analyzed(state: &AppState, owner: &str, name: &str) -> ApiResult<ArtifactDir> {
    RepoCoordinates::new(owner, name, String::new())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let dir = state.store.repo_by_name(owner, name);
    match dir.meta()? {
        Some(_) => Ok(dir),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("{owner}/{name} has not been analyzed"),
        )),
    }
}

fn artifact(state: &AppState, owner: &str, name: &str, file: &str, content_type: &'static str) -> ApiResult<Response> {
    let bytes = analyzed(state, owner, name)?.read(file)?;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static(content_type))],
        bytes,
    )
        .into_response())
}

async fn tree_json(State(state): State<Arc<AppState>>, Path((owner, name)): Path<(String, String)>) -> ApiResult<Response> {
    artifact(&state, &owner, &name, TREE_JSON, "application/json")
}

async fn tree_csv(State(state): State<Arc<AppState>>, Path((owner, name)): Path<(String, String)>) -> ApiResult<Response> {
    let mut resp = artifact(&state, &owner, &name, TREE_CSV, "text/csv; charset=utf-8")?;
    let disposition = format!("attachment; filename=\"{owner}__{name}.csv\"");
    if let Ok(v) = HeaderValue::from_str(&disposition) {
        resp.headers_mut().insert(header::CONTENT_DISPOSITION, v);
    }
    Ok(resp)
}

/// Parsed artifacts for simulation, cached by content hash.
pub struct Loaded {
    matrix: KnowledgeMatrix<f64>,
    tree: RepoTree<f64>,
}

fn load(state: &AppState, dir: &ArtifactDir) -> ApiResult<Arc<Loaded>> {
    let meta = dir.verify()?;
    let key = dir.path().to_string_lossy().to_string();
    let stamp = format!("{}:{}", meta.sha256[TREE_JSON], meta.sha256[MATRIX_JSON]);
    if let Some((cached, loaded)) = state.sim_cache.lock().unwrap().get(&key) {
        if *cached == stamp {
            return Ok(loaded.clone());
        }
    }
    let internal = |e: String| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e);
    let matrix: KnowledgeMatrix<f64> =
        serde_json::from_slice(&dir.read(MATRIX_JSON)?).map_err(|e| internal(e.to_string()))?;
    let tree = export::from_json(&dir.read(TREE_JSON)?).map_err(|e| internal(e.to_string()))?;
    let loaded = Arc::new(Loaded { matrix, tree });
    state.sim_cache.lock().unwrap().insert(key, (stamp, loaded.clone()));
    Ok(loaded)
}

#[derive(Deserialize)]
struct SimulateRequest {
    #[serde(default)]
    excluded: Vec<String>,
}

async fn simulate(
    State(state): State<Arc<AppState>>,
    Path((owner, name)): Path<(String, String)>,
    body: Result<Json<SimulateRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let dir = analyzed(&state, &owner, &name)?;
    let excluded: BTreeSet<String> = req.excluded.into_iter().collect();
    let deltas = tokio::task::spawn_blocking(move || {
        let loaded = load(&state, &dir)?;
        engine::simulate(&loaded.matrix, &loaded.tree, &excluded).map_err(|EngineError::UnknownAuthors(unknown)| {
            ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": "unknown authors", "unknown": unknown }),
            }
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(deltas).into_response())
}

async fn search(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let query = params.get("q").map(String::as_str).unwrap_or("");
    let limit = match params.get("limit") {
        None => DEFAULT_SEARCH_LIMIT,
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid limit {raw:?}")))?,
    };
    match state.provider.search_repos(query, limit).await {
        Ok(repos) => Ok(Json(repos).into_response()),
        Err(e) => {
            let status = match &e {
                ProviderError::InvalidInput(_) => StatusCode::BAD_REQUEST,
                ProviderError::RateLimited { .. } => StatusCode::TOO_MANY_REQUESTS,
                ProviderError::Offline(_) => StatusCode::SERVICE_UNAVAILABLE,
                _ => StatusCode::BAD_GATEWAY,
            };
            let mut resp = ApiError::new(status, e.to_string()).into_response();
            if let ProviderError::RateLimited { retry_after: Some(after), .. } = e {
                resp.headers_mut()
                    .insert(header::RETRY_AFTER, HeaderValue::from(after.as_secs()));
            }
            Ok(resp)
        }
    }
}
