//! HTTP API over one loaded corpus.
//!
//! | route | |
//! |---|---|
//! | `GET /healthz` | `ok` |
//! | `GET /api/features` | template features and candidates |
//! | `POST /api/query` | `{query, distributions?, offset?, limit?}` |
//! | `GET /api/stats` | `?feature=&by_sex=&age_cuts=55,65,75` |
//! | `GET /api/reports/{id}` | one stored report |
//! | `POST /api/convert` | `{text, report_id?}` |
//!
//! Errors are JSON `{"error": ...}`; query syntax errors add `offset`.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fsr_core::analytics::{stratified_counts, AgeBins};
use fsr_core::query::{execute, parse_query, result_stats, DEFAULT_DISTRIBUTIONS};
use fsr_core::report::Corpus;
use fsr_core::template::Template;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::commands::features_json;
use crate::engine::Engine;
use crate::error::CliError;

pub const DEFAULT_PAGE: usize = 50;

pub struct AppState {
    pub corpus: Corpus,
    pub engine: Engine,
}

impl AppState {
    fn template(&self) -> &Template {
        self.engine.template()
    }
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Transport(_) => StatusCode::BAD_GATEWAY,
            CliError::Usage(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e)
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

#[derive(Deserialize)]
struct QueryRequest {
    query: String,
    distributions: Option<Vec<String>>,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn query(State(s): State<Arc<AppState>>, Json(req): Json<QueryRequest>) -> ApiResult {
    let t = s.template();
    let q = parse_query(&req.query, t).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        body: json!({ "error": e.kind.to_string(), "offset": e.offset }),
    })?;
    let res = execute(&q, &s.corpus, t);
    let names: Vec<&str> = match &req.distributions {
        Some(v) => v.iter().map(String::as_str).collect(),
        None => DEFAULT_DISTRIBUTIONS.to_vec(),
    };
    let dists = result_stats(&res, &s.corpus, t, &names)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let limit = req.limit.unwrap_or(DEFAULT_PAGE);
    let page: Vec<Value> = res
        .matches
        .iter()
        .skip(req.offset)
        .take(limit)
        .map(|m| {
            let mut v = json!(m);
            v["source_text"] = json!(s
                .corpus
                .get(&m.report_id)
                .and_then(|r| r.source_text.clone()));
            v
        })
        .collect();
    Ok(Json(json!({
        "query": res.query,
        "count": res.count,
        "offset": req.offset,
        "matches": page,
        "distributions": dists,
    })))
}

#[derive(Deserialize)]
struct StatsParams {
    feature: String,
    #[serde(default)]
    by_sex: bool,
    age_cuts: Option<String>,
}

async fn stats(State(s): State<Arc<AppState>>, Query(p): Query<StatsParams>) -> ApiResult {
    let bad = |e: &dyn std::fmt::Display| ApiError::new(StatusCode::BAD_REQUEST, e);
    let bins = match p.age_cuts.as_deref() {
        None | Some("") => AgeBins::default(),
        Some(text) => {
            let cuts = text
                .split(',')
                .map(|c| c.trim().parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(&format!("age_cuts: {e}")))?;
            AgeBins::from_cuts(&cuts).map_err(|e| bad(&e))?
        }
    };
    let table = stratified_counts(&s.corpus, s.template(), &p.feature, &bins, p.by_sex)
        .map_err(|e| bad(&e))?;
    Ok(Json(table.to_json()))
}

async fn report(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    s.corpus
        .get(&id)
        .map(|r| Json(r.to_json()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no report {id:?}")))
}

#[derive(Deserialize)]
struct ConvertRequest {
    text: String,
    #[serde(default)]
    report_id: String,
}

async fn convert(State(s): State<Arc<AppState>>, Json(req): Json<ConvertRequest>) -> ApiResult {
    let r = tokio::task::spawn_blocking(move || s.engine.convert(&req.report_id, &req.text, 0))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    Ok(Json(r.to_json()))
}

async fn features(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(features_json(s.template()))
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/features", get(features))
        .route("/api/query", post(query))
        .route("/api/stats", get(stats))
        .route("/api/reports/{id}", get(report))
        .route("/api/convert", post(convert))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until interrupted.
pub async fn serve(router: Router, listen: &str) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|e| CliError::io(listen, e))?;
    let addr = listener.local_addr().map_err(|e| CliError::io(listen, e))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::io(listen, e))
}
