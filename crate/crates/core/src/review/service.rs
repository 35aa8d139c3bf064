//! HTTP front end of the review store.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use serde_json::json;
use tokio::net::TcpListener;

use super::{ClipFilter, DecisionRequest, ReviewStatus, ReviewStore};
use crate::dataset::Protocol;
use crate::error::Error;
use crate::interval::FRAMES_PER_CLIP;
use crate::visibility::FrameVariant;

const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 1000;

const PLACEHOLDER_UI: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>review</title></head>\
<body><p>No UI bundle configured. The JSON API lives under <code>/clips</code> and <code>/export</code>.</p></body></html>\n";

#[derive(Clone)]
pub struct AppState {
    store: Arc<RwLock<ReviewStore>>,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(store: ReviewStore, ui_dir: Option<PathBuf>) -> Self {
        AppState {
            store: Arc::new(RwLock::new(store)),
            ui_dir,
        }
    }
}

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }

    fn not_found(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::NOT_FOUND, msg.into())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownClip(_) => StatusCode::NOT_FOUND,
            Error::Decision(_) | Error::Interval(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Schema(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn reject_unknown_params(q: &HashMap<String, String>, allowed: &[&str]) -> ApiResult<()> {
    match q.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ApiError::bad_request(format!(
            "unknown query parameter `{k}`"
        ))),
        None => Ok(()),
    }
}

fn parse_usize(q: &HashMap<String, String>, key: &str, default: usize) -> ApiResult<usize> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{key}` must be a positive integer"))),
    }
}

async fn list_clips(
    State(app): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    reject_unknown_params(&q, &["status", "category", "page", "page_size"])?;
    let status = match q.get("status").map(String::as_str) {
        None | Some("") | Some("all") => None,
        Some(s) => Some(s.parse::<ReviewStatus>()?),
    };
    let filter = ClipFilter {
        status,
        category: q.get("category").filter(|c| !c.is_empty()).cloned(),
    };
    let page = parse_usize(&q, "page", 1)?;
    let page_size = parse_usize(&q, "page_size", DEFAULT_PAGE_SIZE)?;
    if page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page_size is capped at {MAX_PAGE_SIZE}"
        )));
    }
    let store = app.store.read().expect("store lock");
    Ok(Json(store.list(&filter, page, page_size)?).into_response())
}

async fn get_clip(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let store = app.store.read().expect("store lock");
    Ok(Json(store.detail(&id)?).into_response())
}

async fn get_candidates(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let store = app.store.read().expect("store lock");
    let cands = store
        .candidates(&id)
        .ok_or_else(|| Error::UnknownClip(id.clone()))?;
    Ok(Json(json!({ "clip_id": id, "candidates": cands })).into_response())
}

async fn get_frame(
    State(app): State<AppState>,
    UrlPath((id, variant, index)): UrlPath<(String, String, String)>,
) -> ApiResult<Response> {
    let variant = match variant.as_str() {
        "marked" => FrameVariant::Marked,
        "unmarked" => FrameVariant::Unmarked,
        other => return Err(ApiError::bad_request(format!("unknown variant `{other}`"))),
    };
    let index: usize = index
        .parse()
        .map_err(|_| ApiError::bad_request(format!("frame index `{index}` is not an integer")))?;
    if index >= FRAMES_PER_CLIP {
        return Err(ApiError::bad_request(format!(
            "frame index {index} outside [0, {}]",
            FRAMES_PER_CLIP - 1
        )));
    }
    let dir = {
        let store = app.store.read().expect("store lock");
        if store.manifest().get(&id).is_none() {
            return Err(Error::UnknownClip(id).into());
        }
        store
            .clip_frame_dir(&id)
            .ok_or_else(|| ApiError::not_found("no frame root configured"))?
    };
    let path = dir
        .join(variant.dir_name())
        .join(format!("frame_{index:04}.png"));
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("frame {index} of `{id}` is missing")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn post_decision(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: DecisionRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("decision body: {e}"),
        )
    })?;
    let mut store = app.store.write().expect("store lock");
    let stored = store.submit(&id, req, Utc::now())?;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

async fn export(
    State(app): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    reject_unknown_params(&q, &["protocol"])?;
    let protocol = match q.get("protocol").map(String::as_str) {
        None | Some("") => None,
        Some(p) => Some(p.parse::<Protocol>()?),
    };
    let manifest = app.store.read().expect("store lock").export(protocol);
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        manifest.to_json_pretty(),
    )
        .into_response())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

async fn static_file(app: &AppState, rel: &str) -> ApiResult<Response> {
    let Some(root) = &app.ui_dir else {
        return if rel.is_empty() || rel == "index.html" {
            Ok(Html(PLACEHOLDER_UI).into_response())
        } else {
            Err(ApiError::not_found(format!("no such resource `/{rel}`")))
        };
    };
    let rel = Path::new(if rel.is_empty() { "index.html" } else { rel });
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(ApiError::bad_request("invalid path"));
    }
    let path = root.join(rel);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("no such resource `/{}`", rel.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn ui_index(State(app): State<AppState>) -> ApiResult<Response> {
    static_file(&app, "").await
}

async fn ui_asset(
    State(app): State<AppState>,
    UrlPath(rel): UrlPath<String>,
) -> ApiResult<Response> {
    static_file(&app, &rel).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/clips", get(list_clips))
        .route("/clips/{id}", get(get_clip))
        .route("/clips/{id}/candidates", get(get_candidates))
        .route("/clips/{id}/frames/{variant}/{index}", get(get_frame))
        .route("/clips/{id}/decision", axum::routing::post(post_decision))
        .route("/export", get(export))
        .route("/", get(ui_index))
        .route("/{*path}", get(ui_asset))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn run(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    eprintln!(
        "review service listening on http://{}",
        listener.local_addr()?
    );
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
