//! JSON/PNG API over a [`Workspace`]. Writes are serialized through one lock
//! and guarded by per-image revisions; reads use the latest published
//! snapshot of the project state.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::events::EditEvent;
use super::project::{Project, HITL_SCHEMA};
use super::workspace::{Layout, Workspace};
use crate::error::{Error, Result};
use crate::raster::{decode_mask_png, encode_gray_png, enhance_contrast};

pub const SCHEMA_HEADER: &str = "x-schema";

struct Shared {
    ws: Mutex<Workspace>,
    snapshot: RwLock<Arc<Project>>,
    layout: Layout,
}

impl Shared {
    fn snapshot(&self) -> Arc<Project> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Run a mutation off the async executor and publish the new state.
    async fn write<T: Send + 'static>(
        self: &Arc<Self>,
        f: impl FnOnce(&mut Workspace) -> Result<T> + Send + 'static,
    ) -> Result<T> {
        let shared = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut ws = shared
                .ws
                .lock()
                .map_err(|_| Error::State("workspace lock poisoned".into()))?;
            let out = f(&mut ws);
            *shared.snapshot.write().expect("snapshot lock") = Arc::new(ws.project().clone());
            out
        })
        .await
        .map_err(|e| Error::State(format!("worker failed: {e}")))?
    }
}

type AppState = Arc<Shared>;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(Error::invalid(e.body_text()))
    }
}

fn status_for(e: &Error) -> (StatusCode, &'static str) {
    match e {
        Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        Error::StaleRevision { .. } => (StatusCode::CONFLICT, "stale_revision"),
        Error::State(_) => (StatusCode::CONFLICT, "conflict"),
        Error::ReplayMismatch(_) => (StatusCode::UNPROCESSABLE_ENTITY, "replay_mismatch"),
        Error::InvalidEditLog(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit_log"),
        Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::Malformed(_)
        | Error::NonBinaryMask(_)
        | Error::Codec(_)
        | Error::Json(_) => (StatusCode::BAD_REQUEST, "bad_request"),
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = status_for(&self.0);
        let mut body = json!({ "schema": HITL_SCHEMA, "kind": kind, "error": self.0.to_string() });
        if let Error::StaleRevision { expected, .. } = self.0 {
            body["revision"] = json!(expected);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn ok(mut body: Value) -> Json<Value> {
    body["schema"] = json!(HITL_SCHEMA);
    Json(body)
}

fn png(bytes: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))],
        bytes,
    )
        .into_response()
}

async fn add_schema_header(mut res: Response) -> Response {
    res.headers_mut()
        .insert(SCHEMA_HEADER, HeaderValue::from_static(HITL_SCHEMA));
    res
}

async fn get_project(State(s): State<AppState>) -> Json<Value> {
    let p = s.snapshot();
    let rounds: Vec<Value> = p
        .rounds
        .iter()
        .map(|r| {
            json!({
                "number": r.number,
                "n_images": r.images.len(),
                "n_corrected": r.images.values().filter(|e| e.status == super::ImageStatus::Corrected).count(),
                "finalized": r.is_finalized(),
            })
        })
        .collect();
    ok(json!({
        "id": p.id,
        "config": p.config,
        "backend": p.backend,
        "images": p.images,
        "rounds": rounds,
        "current_round": p.current_round().map(|r| r.number),
    }))
}

async fn get_round(State(s): State<AppState>, Path(n): Path<u32>) -> ApiResult<Json<Value>> {
    let p = s.snapshot();
    Ok(ok(json!({ "round": p.round(n)? })))
}

#[derive(Debug, Deserialize)]
struct StartRound {
    image_ids: Vec<String>,
}

async fn post_round(
    State(s): State<AppState>,
    body: std::result::Result<Json<StartRound>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let round = s
        .write(move |ws| ws.start_round(&req.image_ids).cloned())
        .await?;
    Ok(ok(json!({ "round": round })))
}

#[derive(Debug, Deserialize)]
struct BaseQuery {
    mode: Option<String>,
}

async fn get_base(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<BaseQuery>,
) -> ApiResult<Response> {
    s.snapshot().image(&id)?;
    let img = s.layout.read_image(&id)?;
    let img = match q.mode.as_deref().unwrap_or("raw") {
        "raw" => img,
        "enhanced" => enhance_contrast(&img),
        other => {
            return Err(
                Error::invalid(format!("unknown mode {other:?}; use raw or enhanced")).into(),
            )
        }
    };
    Ok(png(encode_gray_png(&img)?))
}

fn assigned(p: &Project, id: &str) -> Result<u32> {
    p.image(id)?;
    p.round_of(id)
        .map(|r| r.number)
        .ok_or_else(|| Error::NotFound(format!("image {id} is not assigned to a round")))
}

async fn get_proposal(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let n = assigned(&s.snapshot(), &id)?;
    let path = s.layout.proposal(n, &id);
    let bytes =
        std::fs::read(&path).map_err(|e| Error::NotFound(format!("{}: {e}", path.display())))?;
    Ok(png(bytes))
}

async fn get_events(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let p = s.snapshot();
    let n = assigned(&p, &id)?;
    let entry = &p.round(n)?.images[&id];
    let events = s.layout.read_events(n, &id)?;
    Ok(ok(json!({
        "image_id": id,
        "round": n,
        "revision": entry.revision,
        "status": entry.status,
        "events": events,
    })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostEvents {
    pub events: Vec<EditEvent>,
    pub revision: u64,
}

async fn post_events(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: std::result::Result<Json<PostEvents>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let image = id.clone();
    let revision = s
        .write(move |ws| ws.append_events(&image, &req.events, req.revision))
        .await?;
    Ok(ok(json!({ "image_id": id, "revision": revision })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PutCorrection {
    pub final_mask_png_base64: String,
    pub active_ms: Option<u64>,
    pub revision: u64,
}

async fn put_correction(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: std::result::Result<Json<PutCorrection>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(req.final_mask_png_base64.trim())
        .map_err(|e| Error::invalid(format!("final mask is not valid base64: {e}")))?;
    let mask = decode_mask_png(&bytes)?;
    let image = id.clone();
    let entry = s
        .write(move |ws| {
            ws.submit_correction(&image, &mask, req.active_ms, req.revision)
                .cloned()
        })
        .await?;
    Ok(ok(json!({
        "image_id": id,
        "revision": entry.revision,
        "status": entry.status,
        "active_ms": entry.active_ms,
        "pixels_changed": entry.pixels_changed,
        "dice": entry.dice,
    })))
}

async fn post_finalize(State(s): State<AppState>, Path(n): Path<u32>) -> ApiResult<Json<Value>> {
    let report = s.write(move |ws| ws.finalize_round(n)).await?;
    Ok(ok(json!({ "report": report })))
}

async fn get_report(State(s): State<AppState>, Path(n): Path<u32>) -> ApiResult<Json<Value>> {
    let p = s.snapshot();
    let report = p
        .round(n)?
        .report
        .as_ref()
        .ok_or_else(|| Error::NotFound(format!("report for round {n}")))?;
    Ok(ok(json!({ "report": report })))
}

async fn fallback() -> ApiError {
    ApiError(Error::NotFound("no such endpoint".into()))
}

/// Routes for one project.
pub fn router(ws: Workspace) -> Router {
    let shared = Arc::new(Shared {
        snapshot: RwLock::new(Arc::new(ws.project().clone())),
        layout: ws.layout().clone(),
        ws: Mutex::new(ws),
    });
    Router::new()
        .route("/api/project", get(get_project))
        .route("/api/rounds", post(post_round))
        .route("/api/rounds/{n}", get(get_round))
        .route("/api/rounds/{n}/finalize", post(post_finalize))
        .route("/api/rounds/{n}/report", get(get_report))
        .route("/api/images/{id}/base", get(get_base))
        .route("/api/images/{id}/proposal", get(get_proposal))
        .route("/api/images/{id}/events", get(get_events).post(post_events))
        .route("/api/images/{id}/correction", put(put_correction))
        .fallback(fallback)
        .layer(axum::middleware::map_response(add_schema_header))
        .with_state(shared)
}

/// Serve until the process is stopped.
pub async fn serve(ws: Workspace, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    serve_on(ws, listener).await
}

pub async fn serve_on(ws: Workspace, listener: tokio::net::TcpListener) -> Result<()> {
    let addr = listener
        .local_addr()
        .map_err(|e| Error::io("listener", e))?;
    axum::serve(listener, router(ws))
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}
