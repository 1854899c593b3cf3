use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ontomerge::advisor::AdvisorError;
use ontomerge::engine::EngineError;
use serde_json::json;
use thiserror::Error;

use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("state version {given} is stale; current version is {current}")]
    VersionConflict { given: u64, current: u64 },
    #[error(transparent)]
    Operation(AdvisorError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<AdvisorError> for ApiError {
    fn from(e: AdvisorError) -> Self {
        ApiError::Operation(e)
    }
}

/// Stable machine-readable name of an operation failure.
pub fn failure_code(e: &AdvisorError) -> &'static str {
    match e {
        AdvisorError::Engine(e) => match e {
            EngineError::InvalidConfig(_) => "invalid-config",
            EngineError::UnknownFrame(_) => "unknown-frame",
            EngineError::SameFrame(_) => "same-frame",
            EngineError::KindMismatch { .. } => "kind-mismatch",
            EngineError::AlreadyImaged { .. } => "already-imaged",
            EngineError::NotASourceFrame(_) => "not-a-source-frame",
            EngineError::NameCollision { .. } => "name-collision",
            EngineError::InvalidName(_) => "invalid-name",
            EngineError::Cycle(_) => "cycle",
            EngineError::ConfirmationRequired { .. } => "confirmation-required",
            EngineError::UnknownEdge { .. } => "unknown-edge",
            EngineError::UnknownValue { .. } => "unknown-value",
            EngineError::EmptyLog => "empty-log",
            EngineError::Invalid(_) => "ill-formed",
        },
        AdvisorError::Match(_) => "invalid-match-config",
        AdvisorError::NoPreferredSet => "no-preferred-source",
        AdvisorError::Unresolvable(_) => "unresolvable",
        AdvisorError::UnknownSuggestion(_) => "unknown-suggestion",
        AdvisorError::GuardExceeded { .. } => "guard-exceeded",
        AdvisorError::UnresolvedConflicts(_) => "unresolved-conflicts",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match &self {
            ApiError::UnknownSession(_) => (StatusCode::NOT_FOUND, json!({ "error": "unknown-session", "message": message })),
            ApiError::VersionConflict { current, .. } => (
                StatusCode::CONFLICT,
                json!({ "error": "version-conflict", "message": message, "version": current }),
            ),
            ApiError::Operation(e) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "operation-error", "code": failure_code(e), "message": message }),
            ),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({ "error": "bad-request", "message": message })),
            ApiError::Store(StoreError::Advisor(e)) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "operation-error", "code": failure_code(e), "message": message }),
            ),
            ApiError::Store(_) => {
                tracing::error!(%message, "snapshot failure");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "storage", "message": message }))
            }
        };
        (status, Json(body)).into_response()
    }
}
