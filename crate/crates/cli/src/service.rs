//! JSON API over the pipeline and the triage store.

use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

use cmrx_core::confidence::{formula_checks, ConfidenceBundle, FormulaCheck, Scorer};
use cmrx_core::gateway::{text_seed, CompletionBackend, SamplingConfig, TransportError};
use cmrx_core::pipeline::run_report;
use cmrx_core::report::{CmrRecord, ParseError};
use cmrx_core::triage::{
    ItemStatus, QueueCounts, ReportState, ReviewDecision, ReviewItem, TriageError, TriageStore, Verdict,
};

use crate::lines::ExtractLine;

pub struct AppState {
    store: Mutex<TriageStore>,
    backend: Box<dyn CompletionBackend>,
    scorer: Scorer,
    sampling: SamplingConfig,
    permits: Arc<Semaphore>,
    auth_token: Option<String>,
}

impl AppState {
    pub fn new(
        store: TriageStore,
        backend: Box<dyn CompletionBackend>,
        scorer: Scorer,
        sampling: SamplingConfig,
        workers: usize,
        auth_token: Option<String>,
    ) -> Arc<Self> {
        Arc::new(AppState {
            store: Mutex::new(store),
            backend,
            scorer,
            sampling,
            permits: Arc::new(Semaphore::new(workers.max(1))),
            auth_token,
        })
    }

    /// The store, for seeding and inspection.
    pub fn store(&self) -> MutexGuard<'_, TriageStore> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Unauthorized,
    NotFound(String),
    Conflict(String),
    Upstream(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into()),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Upstream(m) => (StatusCode::BAD_GATEWAY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

impl From<TriageError> for ApiError {
    fn from(e: TriageError) -> Self {
        let msg = e.to_string();
        match e {
            TriageError::NotFound(_) => ApiError::NotFound(msg),
            TriageError::AlreadyDecided { .. } => ApiError::Conflict(msg),
            TriageError::InvalidValue(_) => ApiError::BadRequest(msg),
            TriageError::Storage(_) => ApiError::Internal(msg),
        }
    }
}

impl From<TransportError> for ApiError {
    fn from(e: TransportError) -> Self {
        ApiError::Upstream(e.to_string())
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let v1 = Router::new()
        .route("/extract", post(extract))
        .route("/review/queue", get(queue))
        .route("/review/{item_id}", post(review))
        .route("/reports/{report_id}", get(report))
        .route("/metrics", get(metrics))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    let app = Router::new()
        .nest("/v1", v1)
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn require_token(State(s): State<Arc<AppState>>, req: Request, next: Next) -> Result<Response, ApiError> {
    if let Some(token) = &s.auth_token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return Err(ApiError::Unauthorized);
        }
    }
    Ok(next.run(req).await)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractRequest {
    text: String,
    /// Derived from the text when absent.
    report_id: Option<String>,
}

async fn extract(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<ExtractLine>, ApiError> {
    let req: ExtractRequest = parse_body(&body)?;
    let permit = s.permits.clone().acquire_owned().await.map_err(|e| ApiError::Internal(e.to_string()))?;
    blocking(move || {
        let _permit = permit;
        let id = req.report_id.unwrap_or_else(|| format!("T{:016x}", text_seed(&req.text)));
        let ex = run_report(&id, &req.text, s.backend.as_ref(), &s.sampling, &s.scorer)?;
        s.store().ingest(&ex.report_id, &ex.scrubbed_text, &ex.outcome)?;
        Ok(Json(ExtractLine { output: ex.output(), scrubbed_text: ex.scrubbed_text }))
    })
    .await
}

#[derive(Deserialize)]
struct QueueQuery {
    status: Option<String>,
}

#[derive(Serialize)]
struct QueueResponse {
    items: Vec<ReviewItem>,
    counts: QueueCounts,
}

/// `status` is pending (the default), accepted, corrected or all.
async fn queue(State(s): State<Arc<AppState>>, Query(q): Query<QueueQuery>) -> Result<Json<QueueResponse>, ApiError> {
    let status = match q.status.as_deref() {
        None => Some(ItemStatus::Pending),
        Some("all") => None,
        Some(other) => Some(other.parse().map_err(|_| ApiError::BadRequest(format!("unknown status `{other}`")))?),
    };
    let store = s.store();
    Ok(Json(QueueResponse { items: store.queue(status), counts: store.counts() }))
}

#[derive(Deserialize)]
struct ReviewRequest {
    #[serde(flatten)]
    verdict: Verdict,
    reviewer: String,
}

async fn review(
    State(s): State<Arc<AppState>>,
    UrlPath(item_id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<ReviewItem>, ApiError> {
    let req: ReviewRequest = parse_body(&body)?;
    blocking(move || {
        let mut store = s.store();
        let decision = ReviewDecision {
            item_id: item_id.clone(),
            verdict: req.verdict,
            reviewer: req.reviewer,
            timestamp: chrono::Utc::now(),
        };
        store.apply_decision(decision)?;
        store.item(&item_id).cloned().ok_or(ApiError::NotFound(item_id))
    })
    .await
    .map(Json)
}

#[derive(Serialize)]
struct ReportView {
    report_id: String,
    state: ReportState,
    scrubbed_text: String,
    record: Option<CmrRecord>,
    extracted: Option<CmrRecord>,
    confidence_bundle: Option<ConfidenceBundle>,
    formula_checks: Vec<FormulaCheck>,
    items: Vec<ReviewItem>,
}

async fn report(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<ReportView>, ApiError> {
    let store = s.store();
    let r = store.report(&id).ok_or_else(|| ApiError::NotFound(format!("no report `{id}`")))?;
    let checks = r
        .current
        .as_ref()
        .map(|rec| formula_checks(rec, &s.scorer.ledger, &s.scorer.params))
        .unwrap_or_default();
    Ok(Json(ReportView {
        report_id: r.report_id.clone(),
        state: r.state,
        scrubbed_text: r.text.clone(),
        record: r.current.clone(),
        extracted: r.extracted.clone(),
        confidence_bundle: r.bundle.clone(),
        formula_checks: checks,
        items: store.items_for(&id).into_iter().cloned().collect(),
    }))
}

/// Extraction quality of stored reports that carry a reference record.
async fn metrics(State(s): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let store = s.store();
    let with_gold: Vec<_> = store.reports().filter(|r| r.gold.is_some()).collect();
    if with_gold.is_empty() {
        return Err(ApiError::NotFound("no reference records loaded".into()));
    }
    let golds: Vec<CmrRecord> = with_gold.iter().filter_map(|r| r.gold.clone()).collect();
    let preds: Vec<_> = with_gold
        .iter()
        .map(|r| r.extracted.clone().ok_or_else(|| ParseError::Invalid { message: "no sample parsed".into() }))
        .collect();
    let bundles: Option<Vec<ConfidenceBundle>> = with_gold.iter().map(|r| r.bundle.clone()).collect();
    let report = crate::evaluate(&golds, &preds, bundles.as_deref(), s.scorer.params.review_threshold)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(report).into_response())
}
