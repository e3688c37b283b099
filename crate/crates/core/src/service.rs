//! JSON-over-HTTP front end. Owns the current (knowledge base, model)
//! snapshot and swaps it atomically on retrain.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::classify::{IntentCategory, IntentModel, DEFAULT_ALPHA};
use crate::dialogue::{
    self, read_jsonl, DialogueError, FeedbackError, FeedbackStore, JsonlLog, ResponseKind,
    DEFAULT_THRESHOLD,
};
use crate::gen::{self, TrainingExample};
use crate::kb::{self, KnowledgeBase};

pub const MAX_QUESTION_CHARS: usize = 2000;
pub const FEEDBACK_FILE: &str = "feedback.jsonl";
pub const MISSED_FILE: &str = "missed.jsonl";
pub const LABELED_FILE: &str = "labeled.jsonl";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: Option<PathBuf>,
    pub kb_path: Option<PathBuf>,
    pub templates_path: Option<PathBuf>,
    pub threshold: f64,
    pub admin_token: Option<String>,
    pub cors_origins: Vec<String>,
    pub alpha: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: None,
            kb_path: None,
            templates_path: None,
            threshold: DEFAULT_THRESHOLD,
            admin_token: None,
            cors_origins: Vec::new(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Kb(#[from] kb::KbError),
    #[error(transparent)]
    Gen(#[from] gen::GenError),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

/// An immutable (knowledge base, model) pair served together.
#[derive(Debug)]
pub struct Snapshot {
    pub kb: Arc<KnowledgeBase>,
    pub model: Arc<IntentModel>,
    pub threshold: f64,
    pub version: u64,
}

#[derive(Debug, Default)]
pub struct Metrics {
    pub asks: AtomicU64,
    pub answered: AtomicU64,
    pub idk: AtomicU64,
    pub feedback_yes: AtomicU64,
    pub feedback_no: AtomicU64,
}

#[derive(Debug)]
pub struct ServiceState {
    current: RwLock<Option<Arc<Snapshot>>>,
    pub metrics: Metrics,
    feedback: FeedbackStore,
    missed: Option<JsonlLog>,
    config: ServiceConfig,
    retrain_lock: tokio::sync::Mutex<()>,
    started_at: Instant,
}

impl ServiceState {
    /// A state with no snapshot loaded; feedback and missed questions are
    /// persisted under `config.data_dir` when set.
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        let (feedback, missed) = match &config.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                (
                    FeedbackStore::open(dir.join(FEEDBACK_FILE))?,
                    Some(JsonlLog::open(dir.join(MISSED_FILE))?),
                )
            }
            None => (FeedbackStore::in_memory(), None),
        };
        Ok(ServiceState {
            current: RwLock::new(None),
            metrics: Metrics::default(),
            feedback,
            missed,
            config,
            retrain_lock: tokio::sync::Mutex::new(()),
            started_at: Instant::now(),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.current.read().expect("snapshot lock").clone()
    }

    /// Installs a new snapshot and returns its version.
    pub fn install(&self, kb: Arc<KnowledgeBase>, model: Arc<IntentModel>) -> u64 {
        let mut cur = self.current.write().expect("snapshot lock");
        let version = cur.as_ref().map_or(1, |s| s.version + 1);
        *cur = Some(Arc::new(Snapshot {
            kb,
            model,
            threshold: self.config.threshold,
            version,
        }));
        version
    }

    pub fn feedback(&self) -> &FeedbackStore {
        &self.feedback
    }

    /// Hand-labeled extra examples from the data directory.
    pub fn labeled_extras(&self) -> Result<Vec<TrainingExample>, ServiceError> {
        match &self.config.data_dir {
            Some(dir) => Ok(read_jsonl(dir.join(LABELED_FILE))?),
            None => Ok(Vec::new()),
        }
    }

    /// Rebuilds the snapshot from the configured files. The knowledge base
    /// is reloaded from disk when a path is configured.
    pub fn rebuild(&self) -> Result<RetrainSummary, ServiceError> {
        let templates_path = self
            .config
            .templates_path
            .as_ref()
            .ok_or_else(|| ServiceError::Config("no template file configured".into()))?;
        let kb = match (&self.config.kb_path, self.snapshot()) {
            (Some(path), _) => Arc::new(kb::load_guide(path)?),
            (None, Some(snap)) => snap.kb.clone(),
            (None, None) => {
                return Err(ServiceError::Config("no knowledge file configured".into()))
            }
        };
        let templates = gen::parse_templates(templates_path)?;
        let extras = self.labeled_extras()?;
        let (model, corpus) = dialogue::retrain(&kb, &templates, &extras, self.config.alpha)?;
        let previous_version = self.snapshot().map_or(0, |s| s.version);
        let intents = corpus.per_intent_counts.len();
        let examples = corpus.len();
        let new_version = self.install(kb, Arc::new(model));
        Ok(RetrainSummary {
            examples,
            intents,
            previous_version,
            new_version,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainSummary {
    pub examples: usize,
    pub intents: usize,
    pub previous_version: u64,
    pub new_version: u64,
}

#[derive(Debug, Deserialize)]
struct AskRequest {
    question: String,
    #[serde(default)]
    session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
    pub kind: ResponseKind,
    pub intent: Option<IntentCategory>,
    pub confidence: f64,
    pub suggestions: Vec<String>,
    pub feedback_id: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackRequest {
    feedback_id: String,
    helpful: Vote,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Vote {
    Yes,
    No,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn ask(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let req: AskRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed body: {e}")),
    };
    if req.question.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "question is empty");
    }
    if req.question.chars().count() > MAX_QUESTION_CHARS {
        return error(
            StatusCode::BAD_REQUEST,
            format!("question exceeds {MAX_QUESTION_CHARS} characters"),
        );
    }
    let Some(snap) = state.snapshot() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded");
    };
    let exchange = match dialogue::respond(&snap.model, &snap.kb, &req.question, snap.threshold) {
        Ok(x) => x,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    if let Err(e) = state.feedback.issue(exchange.feedback.clone()) {
        log::error!("could not persist feedback record: {e}");
    }
    if let (Some(log), Some(missed)) = (&state.missed, &exchange.missed) {
        if let Err(e) = log.append(missed) {
            log::error!("could not persist missed question: {e}");
        }
    }
    state.metrics.asks.fetch_add(1, Ordering::SeqCst);
    match exchange.response.kind {
        ResponseKind::Answered => state.metrics.answered.fetch_add(1, Ordering::SeqCst),
        ResponseKind::Idk => state.metrics.idk.fetch_add(1, Ordering::SeqCst),
    };
    let r = exchange.response;
    Json(AskResponse {
        answer: r.answer_text,
        kind: r.kind,
        intent: r.intent,
        confidence: r.confidence,
        suggestions: r.suggestions,
        feedback_id: r.feedback_id,
        latency_ms: r.latency_ms,
        session: req.session,
    })
    .into_response()
}

async fn feedback(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let req: FeedbackRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed body: {e}")),
    };
    let helpful = matches!(req.helpful, Vote::Yes);
    match state.feedback.record_feedback(&req.feedback_id, helpful) {
        Ok(_) => {
            let counter = if helpful {
                &state.metrics.feedback_yes
            } else {
                &state.metrics.feedback_no
            };
            counter.fetch_add(1, Ordering::SeqCst);
            StatusCode::NO_CONTENT.into_response()
        }
        Err(e @ FeedbackError::UnknownFeedbackId(_)) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ FeedbackError::AlreadyVoted(_)) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e @ FeedbackError::Io(_)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn admin_token(headers: &HeaderMap) -> Option<&str> {
    if let Some(v) = headers.get("x-admin-token") {
        return v.to_str().ok();
    }
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
}

async fn retrain(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Response {
    let authorized = match (&state.config.admin_token, admin_token(&headers)) {
        (Some(expected), Some(given)) => expected == given,
        _ => false,
    };
    if !authorized {
        return error(StatusCode::UNAUTHORIZED, "admin token missing or wrong");
    }
    let _guard = state.retrain_lock.lock().await;
    let worker = state.clone();
    match tokio::task::spawn_blocking(move || worker.rebuild()).await {
        Ok(Ok(summary)) => {
            log::info!(
                "retrained: {} examples, version {} -> {}",
                summary.examples,
                summary.previous_version,
                summary.new_version
            );
            Json(summary).into_response()
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("retrain task failed: {e}"),
        ),
    }
}

async fn health(State(state): State<Arc<ServiceState>>) -> Response {
    let body = match state.snapshot() {
        Some(s) => json!({
            "status": "ready",
            "kb_version": s.kb.version(),
            "model_fingerprint": s.model.fingerprint(),
            "model_version": s.version,
        }),
        None => json!({
            "status": "not_ready",
            "kb_version": null,
            "model_fingerprint": null,
            "model_version": null,
        }),
    };
    Json(body).into_response()
}

async fn metrics(State(state): State<Arc<ServiceState>>) -> Response {
    let m = &state.metrics;
    Json(json!({
        "asks": m.asks.load(Ordering::SeqCst),
        "answered": m.answered.load(Ordering::SeqCst),
        "idk": m.idk.load(Ordering::SeqCst),
        "feedback_yes": m.feedback_yes.load(Ordering::SeqCst),
        "feedback_no": m.feedback_no.load(Ordering::SeqCst),
        "uptime_seconds": state.started_at.elapsed().as_secs(),
    }))
    .into_response()
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let origins: Vec<HeaderValue> = state
        .config
        .cors_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    let router = Router::new()
        .route("/v1/ask", post(ask))
        .route("/v1/feedback", post(feedback))
        .route("/v1/admin/retrain", post(retrain))
        .route("/v1/health", get(health))
        .route("/v1/metrics", get(metrics))
        .with_state(state);
    if origins.is_empty() {
        router
    } else {
        router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]),
        )
    }
}

pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: Arc<ServiceState>,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub async fn serve(state: Arc<ServiceState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.config.addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
