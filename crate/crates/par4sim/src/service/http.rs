//! REST endpoints over [`Service`]. The worker id comes from the
//! `X-Worker-Id` header or a `worker` query parameter.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use par4sim_core::adaptive::{EventKind, SpanRef, UsageEvent, EVENT_SCHEMA_VERSION};
use serde::Deserialize;
use serde_json::json;

use super::{NewHit, Service, ServiceError};

pub const WORKER_HEADER: &str = "x-worker-id";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": status.canonical_reason(), "reason": self.to_string() }))).into_response()
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/hits", post(create_hit))
        .route("/api/hits/{id}", get(get_hit))
        .route("/api/hits/{id}/candidates", get(candidates))
        .route("/api/events", post(record_event))
        .route("/api/iterations/{t}/close", post(close_iteration))
        .route("/api/metrics", get(metrics))
        .with_state(service)
}

type AppState = State<Arc<Service>>;

fn worker(headers: &HeaderMap, param: Option<&str>) -> Option<String> {
    headers
        .get(WORKER_HEADER)
        .and_then(|v| v.to_str().ok())
        .or(param)
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
}

async fn create_hit(State(svc): AppState, body: Result<Json<NewHit>, axum::extract::rejection::JsonRejection>) -> Response {
    match body {
        Err(e) => ServiceError::BadRequest(e.body_text()).into_response(),
        Ok(Json(new)) => match svc.create_hit(new) {
            Ok(view) => (StatusCode::CREATED, Json(view)).into_response(),
            Err(e) => e.into_response(),
        },
    }
}

#[derive(Debug, Deserialize)]
struct WorkerParam {
    worker: Option<String>,
}

async fn get_hit(State(svc): AppState, Path(id): Path<String>, Query(q): Query<WorkerParam>, headers: HeaderMap) -> Response {
    let w = worker(&headers, q.worker.as_deref());
    match svc.get_hit(&id, w.as_deref()) {
        Ok(view) => Json(view).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct SpanQuery {
    sentence: String,
    start: usize,
    end: usize,
    worker: Option<String>,
}

async fn candidates(
    State(svc): AppState,
    Path(id): Path<String>,
    q: Result<Query<SpanQuery>, axum::extract::rejection::QueryRejection>,
    headers: HeaderMap,
) -> Response {
    let Ok(Query(q)) = q else {
        return ServiceError::BadRequest("expected sentence, start and end parameters".into()).into_response();
    };
    let Some(w) = worker(&headers, q.worker.as_deref()) else {
        return ServiceError::BadRequest("missing worker id".into()).into_response();
    };
    let span = SpanRef { sentence_id: q.sentence, start: q.start, end: q.end };
    match svc.candidates(&id, &span, &w) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Event body as clients send it: ids and timestamps are server-assigned.
#[derive(Debug, Deserialize)]
pub struct EventRequest {
    #[serde(default)]
    pub worker_id: Option<String>,
    pub hit_id: String,
    #[serde(default)]
    pub iteration: u32,
    pub kind: EventKind,
    #[serde(default)]
    pub span: Option<SpanRef>,
    #[serde(default)]
    pub cp_surface: Option<String>,
    #[serde(default)]
    pub chosen_surface: Option<String>,
    #[serde(default)]
    pub snapshot: Vec<String>,
    #[serde(default)]
    pub snapshot_id: Option<String>,
    #[serde(default)]
    pub comment: Option<String>,
}

impl EventRequest {
    pub fn into_event(self, worker_id: String) -> UsageEvent {
        UsageEvent {
            schema_version: EVENT_SCHEMA_VERSION,
            event_id: 0,
            timestamp_ms: 0,
            worker_id,
            hit_id: self.hit_id,
            iteration: self.iteration,
            kind: self.kind,
            span: self.span,
            cp_surface: self.cp_surface,
            chosen_surface: self.chosen_surface,
            snapshot: self.snapshot,
            snapshot_id: self.snapshot_id,
            comment: self.comment,
        }
    }
}

async fn record_event(
    State(svc): AppState,
    headers: HeaderMap,
    body: Result<Json<EventRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let req = match body {
        Ok(Json(r)) => r,
        Err(e) => return ServiceError::BadRequest(e.body_text()).into_response(),
    };
    let header_worker = worker(&headers, None);
    let w = match (header_worker, req.worker_id.clone()) {
        (Some(h), Some(b)) if h != b => {
            return ServiceError::BadRequest("worker id header and body disagree".into()).into_response()
        }
        (Some(w), _) | (None, Some(w)) => w,
        (None, None) => return ServiceError::BadRequest("missing worker id".into()).into_response(),
    };
    match svc.record_event(req.into_event(w)) {
        Ok(id) => (StatusCode::CREATED, Json(json!({ "event_id": id }))).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn close_iteration(State(svc): AppState, Path(t): Path<u32>) -> Response {
    match tokio::task::spawn_blocking(move || svc.close_iteration(t)).await {
        Ok(Ok(record)) => Json(record).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(e.to_string()).into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct MetricsQuery {
    format: Option<String>,
}

async fn metrics(State(svc): AppState, Query(q): Query<MetricsQuery>) -> Response {
    if q.format.as_deref() == Some("csv") {
        return ([(header::CONTENT_TYPE, "text/csv")], svc.metrics_csv()).into_response();
    }
    let matrix: Vec<_> = svc
        .evaluation_matrix()
        .into_iter()
        .map(|(t, upto, ndcg)| json!({ "iteration": t, "trained_through": upto, "mean_ndcg_at_10": ndcg }))
        .collect();
    Json(json!({ "records": svc.records(), "matrix": matrix })).into_response()
}
