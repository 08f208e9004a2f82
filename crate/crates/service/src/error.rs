use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest {
        message: String,
        /// Accepted values, when the request named an unknown one.
        allowed: Vec<String>,
        issues: Vec<String>,
    },
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            message: message.into(),
            allowed: Vec::new(),
            issues: Vec::new(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Serialize)]
struct Body<'a> {
    error: String,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    allowed: &'a [String],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    issues: &'a [String],
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (allowed, issues) = match &self {
            ApiError::BadRequest { allowed, issues, .. } => (allowed.as_slice(), issues.as_slice()),
            _ => (&[][..], &[][..]),
        };
        let body = Body {
            error: self.to_string(),
            allowed,
            issues,
        };
        (self.status(), Json(body)).into_response()
    }
}
