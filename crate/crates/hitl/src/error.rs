use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum HitlError {
    #[error("decision {0} not found")]
    NotFound(u64),
    #[error("{0}")]
    Conflict(String),
    #[error("pending queue is full (cap {cap})")]
    QueueFull { cap: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] orchestra::Error),
    #[error("session actor is not running")]
    Unavailable,
}

impl HitlError {
    pub fn status(&self) -> StatusCode {
        match self {
            HitlError::NotFound(_) => StatusCode::NOT_FOUND,
            HitlError::Conflict(_) | HitlError::QueueFull { .. } => StatusCode::CONFLICT,
            HitlError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            HitlError::Io(_) | HitlError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
            HitlError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
        }
    }
}

impl IntoResponse for HitlError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}
