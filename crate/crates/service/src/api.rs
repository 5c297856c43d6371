use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cartogram::commands::RunConfig;
use serde::Deserialize;
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::error::{ApiError, ApiResult};
use crate::session::{FrameReply, Inputs, Params, Session};
use crate::{AppState, OPENAPI};

const COLOR_RAMP: &str = include_str!("../../../assets/color_ramp.json");

/// All routes of the service over `state`.
pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/params", post(set_params))
        .route("/sessions/{id}/frames/{t}", get(get_frame))
        .route("/sessions/{id}/series", get(get_series))
        .route("/sessions/{id}/status", get(get_status))
        .route("/assets/color_ramp.json", get(|| async { ([(header::CONTENT_TYPE, "application/json")], COLOR_RAMP) }))
        .route("/openapi.yaml", get(|| async { ([(header::CONTENT_TYPE, "application/yaml")], OPENAPI) }));
    app = match &state.options.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(|| async { ApiError::not_found("no such route") }),
    };
    app.with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn lookup(state: &AppState, id: &str) -> ApiResult<Session> {
    state.session(id).ok_or_else(|| ApiError::not_found(format!("no session {id}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    /// GeoJSON as an object or as text.
    map: Value,
    #[serde(default)]
    stats: Option<String>,
    #[serde(default)]
    key: Option<String>,
    #[serde(default)]
    id_column: Option<String>,
    #[serde(default)]
    time_column: Option<String>,
    #[serde(default)]
    params: Option<Value>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let body: CreateBody = parse_body(&body)?;
    let map = match body.map {
        Value::String(s) => s,
        v @ Value::Object(_) => v.to_string(),
        _ => return Err(ApiError::bad_request("map must be a GeoJSON object or string")),
    };
    let inputs = Inputs {
        map,
        stats: body.stats,
        key: body.key,
        id_column: body.id_column.unwrap_or_else(|| RunConfig::default().id_column),
        time_column: body.time_column,
    };
    let params = match &body.params {
        Some(p) => Params::default().merged(p)?,
        None => Params::default(),
    };
    let id = state.next_id(&inputs.hash());
    let persist = state.options.persist_dir.clone();
    let session = blocking(move || Session::create(id, inputs, params, persist.as_deref())).await?;
    let summary = session.summary();
    state.insert(session);
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn set_params(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let session = lookup(&state, &id)?;
    let patch: Value = parse_body(&body)?;
    Ok(Json(blocking(move || session.set_params(&patch)).await?))
}

async fn get_frame(
    State(state): State<Arc<AppState>>,
    Path((id, t)): Path<(String, String)>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let session = lookup(&state, &id)?;
    let t: usize = t.parse().map_err(|_| ApiError::bad_request(format!("time index must be a non-negative integer, got {t:?}")))?;
    let u: f64 = match query.get("u") {
        Some(s) => s.parse().map_err(|_| ApiError::bad_request(format!("fraction u must be a number, got {s:?}")))?,
        None => 0.0,
    };
    match blocking(move || session.frame(t, u)).await? {
        FrameReply::Pending(body) => Ok((StatusCode::ACCEPTED, Json(body)).into_response()),
        FrameReply::Ready { etag, body } => {
            let tag = format!("\"{etag}\"");
            let etag_header = HeaderValue::from_str(&tag).expect("hex etag");
            let matches = headers
                .get(header::IF_NONE_MATCH)
                .and_then(|v| v.to_str().ok())
                .is_some_and(|v| v.split(',').any(|x| x.trim() == tag || x.trim() == "*"));
            if matches {
                return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag_header)]).into_response());
            }
            Ok((StatusCode::OK, [(header::ETAG, etag_header)], Json(body)).into_response())
        }
    }
}

async fn get_series(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(lookup(&state, &id)?.series()))
}

async fn get_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(lookup(&state, &id)?.status()))
}
