use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use stagecraft_core::runtime::TurnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown script `{0}`")]
    UnknownScript(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown generation job `{0}`")]
    UnknownJob(String),
    #[error("{0}")]
    Validation(String),
    #[error("session is finished")]
    SessionFinished,
    #[error("turn failed: {message}")]
    TurnFailed { message: String, replayable: bool },
    #[error("missing or wrong bearer token")]
    Unauthorized,
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    replayable: Option<bool>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownScript(_) | ApiError::UnknownSession(_) | ApiError::UnknownJob(_) => StatusCode::NOT_FOUND,
            ApiError::Validation(_) => StatusCode::BAD_REQUEST,
            ApiError::SessionFinished => StatusCode::CONFLICT,
            ApiError::TurnFailed { .. } => StatusCode::BAD_GATEWAY,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ApiError::UnknownScript(_) => "unknown_script",
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::UnknownJob(_) => "unknown_job",
            ApiError::Validation(_) => "validation",
            ApiError::SessionFinished => "session_finished",
            ApiError::TurnFailed { .. } => "turn_failed",
            ApiError::Unauthorized => "unauthorized",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl From<TurnError> for ApiError {
    fn from(e: TurnError) -> Self {
        match e {
            TurnError::Finished => ApiError::SessionFinished,
            other => ApiError::TurnFailed {
                replayable: other.replayable(),
                message: other.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let replayable = match &self {
            ApiError::TurnFailed { replayable, .. } => Some(*replayable),
            _ => None,
        };
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
            replayable,
        };
        (self.status(), Json(body)).into_response()
    }
}
