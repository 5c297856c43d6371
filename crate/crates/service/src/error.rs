use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// Error body shared by every endpoint: `{code, message, detail}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), detail: Value::Null }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", message)
    }

    /// Rejected uploads: 422 with whatever row or region the parser blamed.
    pub fn invalid_input(e: &cartogram::Error) -> Self {
        use cartogram::Error as E;
        let detail = match e {
            E::NonNumeric { row, column, value } => json!({ "row": row, "column": column, "value": value }),
            E::NonPositiveStatistic { id, value } => json!({ "region": id, "value": value }),
            E::MissingStatistic(id) | E::UnknownRegion(id) | E::DuplicateId(id) => json!({ "region": id }),
            E::MissingTimeStep { id, time } => json!({ "region": id, "time": time }),
            E::NonPolygonal { id, kind } => json!({ "region": id, "geometry": kind }),
            E::InvalidRing { id, reason } => json!({ "region": id, "reason": reason }),
            E::Csv(c) => match c.position() {
                Some(p) => json!({ "row": p.line(), "record": p.record() }),
                None => Value::Null,
            },
            E::Json(j) => json!({ "line": j.line(), "column": j.column() }),
            _ => Value::Null,
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", e.to_string()).with_detail(detail)
    }

    /// Parameter problems are the client's fault; anything else is ours.
    pub fn from_params(e: cartogram::Error) -> Self {
        if e.is_input_error() {
            ApiError::bad_request(e.to_string())
        } else {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
