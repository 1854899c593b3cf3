//! HTTP/JSON session service for interactive merging.
//!
//! Every session carries a state version that grows by one per mutation
//! (applied operation, undo, preferred-source change, dismissal). Mutating
//! requests name the version they were computed against and are refused
//! with `409 version-conflict` when it is stale. Requests for one session
//! are serialized by its lock; different sessions run in parallel.
//!
//! | method | path | body | result |
//! |---|---|---|---|
//! | POST | `/api/sessions` | multipart `source` files (+ `config` JSON) or JSON | session state |
//! | GET | `/api/sessions` | | session ids |
//! | GET | `/api/sessions/{id}` | | session state |
//! | GET | `/api/sessions/{id}/suggestions` | | suggestions |
//! | GET | `/api/sessions/{id}/conflicts` | | conflicts |
//! | POST | `/api/sessions/{id}/operations` | `{version, operation}` | step outcome |
//! | POST | `/api/sessions/{id}/undo` | `{version}` | `{version}` |
//! | PUT | `/api/sessions/{id}/preferred` | `{version, preferred}` | `{version}` |
//! | POST | `/api/sessions/{id}/dismissals` | `{version, operation}` | `{version}` |
//! | GET | `/api/sessions/{id}/export` | `?format=canonical\|owl` or `Accept` | text |

mod error;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use ontomerge::advisor::{Conflict, Resolved, Suggestion};
use ontomerge::engine::{AppliedRecord, Operation, RangeCandidate, SessionConfig, SuffixPolicy};
use ontomerge::io::{read_owl, write_canonical, write_owl};
use ontomerge::matcher::MatchConfig;
use ontomerge::{FrameRef, Ontology};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use uuid::Uuid;

pub use error::{failure_code, ApiError};
pub use store::{Event, SessionStore, StoreError};

use store::{Entry, SharedEntry};

pub type AppState = Arc<SessionStore>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/api/health", get(|| async { "ok" }))
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_state))
        .route("/api/sessions/{id}/suggestions", get(get_suggestions))
        .route("/api/sessions/{id}/conflicts", get(get_conflicts))
        .route("/api/sessions/{id}/operations", post(apply_operation))
        .route("/api/sessions/{id}/undo", post(undo))
        .route("/api/sessions/{id}/preferred", put(set_preferred))
        .route("/api/sessions/{id}/dismissals", post(dismiss))
        .route("/api/sessions/{id}/export", get(export))
        .with_state(store)
}

/// Binds `addr` and serves until the task is cancelled.
pub async fn serve(addr: SocketAddr, data_dir: Option<PathBuf>) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let store = match data_dir {
        Some(dir) => SessionStore::open(dir)?,
        None => SessionStore::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(Arc::new(store))).await?;
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suffix_policy: Option<SuffixPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// JSON form of session creation: OWL documents as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub sources: Vec<String>,
    #[serde(default)]
    pub config: CreateConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageEntry {
    pub source: FrameRef,
    pub image: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionState {
    pub id: Uuid,
    pub created_at: DateTime<Utc>,
    pub version: u64,
    pub config: SessionConfig,
    pub threshold: f64,
    pub sources: Vec<Ontology>,
    pub merged: Ontology,
    pub log: Vec<Operation>,
    pub images: Vec<ImageEntry>,
    pub pending_mismatches: BTreeMap<String, Vec<RangeCandidate>>,
    pub undo_depth: usize,
    /// Source-file warnings from session creation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versioned {
    pub version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApplyRequest {
    pub version: u64,
    pub operation: Operation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreferredRequest {
    pub version: u64,
    pub preferred: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepResponse {
    pub version: u64,
    pub record: AppliedRecord,
    pub resolved: Vec<Resolved>,
    pub suggestions: Vec<Suggestion>,
    /// Conflicts around the frames the step touched.
    pub conflicts: Vec<Conflict>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestionList {
    pub version: u64,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictList {
    pub version: u64,
    pub conflicts: Vec<Conflict>,
}

fn state_of(entry: &Entry, warnings: Vec<String>) -> SessionState {
    let session = entry.advisor.session();
    SessionState {
        id: entry.id,
        created_at: entry.created_at,
        version: entry.version,
        config: session.config().clone(),
        threshold: entry.advisor.config().threshold,
        sources: session.sources().to_vec(),
        merged: session.merged().clone(),
        log: session.log().iter().map(|e| e.operation.clone()).collect(),
        images: session.images().iter().map(|(s, i)| ImageEntry { source: s.clone(), image: i.clone() }).collect(),
        pending_mismatches: session.pending_mismatches().clone(),
        undo_depth: entry.advisor.depth(),
        warnings,
    }
}

fn lookup(store: &SessionStore, id: &str) -> Result<SharedEntry, ApiError> {
    Uuid::parse_str(id).ok().and_then(|u| store.get(&u)).ok_or_else(|| ApiError::UnknownSession(id.to_string()))
}

fn check_version(entry: &Entry, given: u64) -> Result<(), ApiError> {
    if entry.version != given {
        return Err(ApiError::VersionConflict { given, current: entry.version });
    }
    Ok(())
}

/// Runs a mutation on the session under its lock, off the async runtime,
/// then persists the snapshot.
async fn mutate<R, F>(store: AppState, id: String, f: F) -> Result<R, ApiError>
where
    R: Send + 'static,
    F: FnOnce(&mut Entry) -> Result<R, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || {
        let shared = lookup(&store, &id)?;
        let mut entry = shared.lock();
        let out = f(&mut entry)?;
        store.persist(&entry)?;
        Ok(out)
    })
    .await
    .expect("session task panicked")
}

async fn create_session(State(store): State<AppState>, request: Request) -> Result<Response, ApiError> {
    let is_multipart = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let mut documents: Vec<(String, String)> = Vec::new();
    let config: CreateConfig;
    if is_multipart {
        let mut multipart = Multipart::from_request(request, &()).await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let mut cfg = CreateConfig::default();
        while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::BadRequest(e.to_string()))? {
            let name = field.name().unwrap_or_default().to_string();
            let file = field.file_name().unwrap_or_default().to_string();
            let text = field.text().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
            match name.as_str() {
                "source" => documents.push((file, text)),
                "config" => cfg = serde_json::from_str(&text).map_err(|e| ApiError::BadRequest(format!("config: {e}")))?,
                other => return Err(ApiError::BadRequest(format!("unexpected form field `{other}`"))),
            }
        }
        config = cfg;
    } else {
        let Json(body) = Json::<CreateSession>::from_request(request, &())
            .await
            .map_err(|e| ApiError::BadRequest(e.body_text()))?;
        documents = body.sources.into_iter().enumerate().map(|(i, t)| (format!("source{}", i + 1), t)).collect();
        config = body.config;
    }

    let mut sources = Vec::new();
    let mut warnings = Vec::new();
    for (file, text) in documents {
        let fallback = std::path::Path::new(&file).file_stem().and_then(|s| s.to_str()).unwrap_or("source").to_string();
        let doc = read_owl(&text, &fallback).map_err(|e| ApiError::BadRequest(format!("{file}: {e}")))?;
        warnings.extend(doc.warnings.into_iter().map(|w| format!("{file}: {w}")));
        sources.push(doc.ontology);
    }
    let mut session_config = SessionConfig::default();
    if let Some(m) = config.merged_name {
        session_config.merged_name = m;
    }
    if let Some(p) = config.suffix_policy {
        session_config.suffix_policy = p;
    }
    session_config.preferred = config.preferred;
    let threshold = config.threshold.unwrap_or(MatchConfig::default().threshold);

    let state = tokio::task::spawn_blocking(move || -> Result<SessionState, ApiError> {
        let shared = store.create(sources, session_config, threshold)?;
        let entry = shared.lock();
        tracing::info!(id = %entry.id, "session created");
        Ok(state_of(&entry, warnings))
    })
    .await
    .expect("session task panicked")?;
    Ok((StatusCode::CREATED, Json(state)).into_response())
}

async fn list_sessions(State(store): State<AppState>) -> Json<Vec<Uuid>> {
    Json(store.ids())
}

async fn get_state(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let shared = lookup(&store, &id)?;
    let entry = shared.lock();
    Ok(Json(state_of(&entry, Vec::new())))
}

async fn get_suggestions(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<SuggestionList>, ApiError> {
    let shared = lookup(&store, &id)?;
    let entry = shared.lock();
    Ok(Json(SuggestionList { version: entry.version, suggestions: entry.advisor.suggestions().to_vec() }))
}

async fn get_conflicts(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<ConflictList>, ApiError> {
    let shared = lookup(&store, &id)?;
    let entry = shared.lock();
    Ok(Json(ConflictList { version: entry.version, conflicts: entry.advisor.conflicts() }))
}

async fn apply_operation(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ApplyRequest>,
) -> Result<Json<StepResponse>, ApiError> {
    let out = mutate(store, id, move |entry| {
        check_version(entry, req.version)?;
        let outcome = entry.advisor.step(req.operation.clone())?;
        entry.record(Event::Apply { operation: req.operation });
        Ok(StepResponse {
            version: entry.version,
            record: outcome.record,
            resolved: outcome.resolved,
            suggestions: outcome.suggestions,
            conflicts: outcome.conflicts,
        })
    })
    .await?;
    Ok(Json(out))
}

async fn undo(State(store): State<AppState>, Path(id): Path<String>, Json(req): Json<Versioned>) -> Result<Json<Versioned>, ApiError> {
    let out = mutate(store, id, move |entry| {
        check_version(entry, req.version)?;
        entry.advisor.undo()?;
        entry.record(Event::Undo);
        Ok(Versioned { version: entry.version })
    })
    .await?;
    Ok(Json(out))
}

async fn set_preferred(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<PreferredRequest>,
) -> Result<Json<Versioned>, ApiError> {
    let out = mutate(store, id, move |entry| {
        check_version(entry, req.version)?;
        entry.advisor.set_preferred(req.preferred.clone())?;
        entry.record(Event::SetPreferred { preferred: req.preferred });
        Ok(Versioned { version: entry.version })
    })
    .await?;
    Ok(Json(out))
}

async fn dismiss(State(store): State<AppState>, Path(id): Path<String>, Json(req): Json<ApplyRequest>) -> Result<Json<Versioned>, ApiError> {
    let out = mutate(store, id, move |entry| {
        check_version(entry, req.version)?;
        entry.advisor.dismiss(&req.operation)?;
        entry.record(Event::Dismiss { operation: req.operation });
        Ok(Versioned { version: entry.version })
    })
    .await?;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

const OWL_TYPE: &str = "application/rdf+xml";
const CANONICAL_TYPE: &str = "text/plain; charset=utf-8";

async fn export(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let owl = match q.format.as_deref() {
        Some("owl") => true,
        Some("canonical") => false,
        Some(other) => return Err(ApiError::BadRequest(format!("unknown export format `{other}`"))),
        None => headers
            .get(header::ACCEPT)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|a| a.contains(OWL_TYPE) || a.contains("application/owl+xml")),
    };
    let shared = lookup(&store, &id)?;
    let entry = shared.lock();
    let merged = entry.advisor.session().merged();
    let (body, content_type) = if owl { (write_owl(merged), OWL_TYPE) } else { (write_canonical(merged), CANONICAL_TYPE) };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}
