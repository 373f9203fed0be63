use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// An error response: `{"error": code, "message": text}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn empty_body() -> Self {
        Self::new(StatusCode::BAD_REQUEST, "EmptyBody", "request body is empty")
    }

    pub fn too_large(limit: u64) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "BodyTooLarge", format!("upload exceeds the {limit}-byte limit"))
    }

    pub fn not_pcap(detail: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "NotPcap", format!("not a classic pcap file: {detail}"))
    }

    pub fn unknown_id(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownId", format!("no capture with id {id}"))
    }

    pub fn not_ready(id: &str, status: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "NotReady", format!("capture {id} is {status}, not complete"))
    }

    pub fn bad_pagination(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadPagination", message)
    }

    pub fn non_positive_timeout(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "NonPositiveTimeout", message)
    }

    pub fn not_found(path: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("no route for {path}"))
    }

    pub fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
