use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ipoi_core::{CoreError, Violation};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Read(String, String),
    #[error("invalid config file: {0}")]
    Parse(String),
    #[error("invalid value for {0}: {1:?}")]
    Env(String, String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("bad event log record at byte offset {offset}: {reason}")]
    BadRecord { offset: u64, reason: String },
}

impl StoreError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("content error: {0}")]
    Content(#[from] CoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

/// Error returned by HTTP handlers.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unauthorized")]
    Unauthorized,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("validation failed")]
    Validation(Vec<Violation>),
    #[error("dangling reference")]
    Dangling(Vec<Violation>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) | ApiError::Dangling(_) => StatusCode::CONFLICT,
            ApiError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Splits validation output: dangling references are conflicts, the
    /// rest are unprocessable.
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        if violations.iter().any(|v| v.message.starts_with("dangling")) {
            ApiError::Dangling(violations)
        } else {
            ApiError::Validation(violations)
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownProfile(_) | CoreError::UnknownSession(_) | CoreError::UnknownPosition(_) => {
                ApiError::NotFound(e.to_string())
            }
            CoreError::EmptyInquiry | CoreError::EmptyWindow | CoreError::NonMonotonicTrace(_) => {
                ApiError::BadRequest(e.to_string())
            }
            CoreError::PhaseRegression { .. } | CoreError::FallbackImmutable(_) | CoreError::CorruptCatalog(_) => {
                ApiError::Conflict(e.to_string())
            }
            other => ApiError::Validation(vec![Violation::new("request", other.to_string())]),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match &self {
            ApiError::Validation(v) | ApiError::Dangling(v) => json!({
                "error": self.to_string(),
                "violations": v,
            }),
            other => json!({ "error": other.to_string() }),
        };
        (status, Json(body)).into_response()
    }
}
