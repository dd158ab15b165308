//! HTTP facade over editing sessions.
//!
//! Every mutating route answers with `x-session-version` and
//! `x-history-length` headers; JSON object bodies repeat them as `version`
//! and `history_length`. At most one mutation runs per session at a time and
//! a second one is refused with 409 `busy`.

pub mod error;
pub mod store;

use std::future::Future;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::rejection::{BytesRejection, JsonRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::trace::TraceLayer;
use tracing::info;

use veil_core::backends::{Backends, ServiceSettings};
use veil_core::obfuscate::TechniqueParams;
use veil_core::pipeline::{analyze_image, locate_elements, ElementLocation, ElementSelection, Session};
use veil_core::raster::{
    decode_mask_png, is_color_image, load_image, mask_from_green_annotation, save_image, ImageFormat, RegionMask,
};
use veil_core::risk::{attribute_registry, ObfuscationTechnique};

pub use error::ApiError;
pub use store::{SessionSlot, SessionStore};

pub const VERSION_HEADER: &str = "x-session-version";
pub const HISTORY_HEADER: &str = "x-history-length";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub backends: Backends,
    pub max_image_bytes: usize,
}

impl AppState {
    pub fn new(backends: Backends, settings: &ServiceSettings) -> Self {
        Self {
            store: Arc::new(SessionStore::new(Duration::from_secs(settings.session_ttl_secs))),
            backends,
            max_image_bytes: settings.max_image_bytes,
        }
    }
}

type ApiResult = Result<Response, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn stamped(mut resp: Response, s: &Session) -> Response {
    let h = resp.headers_mut();
    h.insert(VERSION_HEADER, HeaderValue::from(s.version()));
    h.insert(HISTORY_HEADER, HeaderValue::from(s.history_len() as u64));
    resp
}

fn json_mutation(s: &Session, mut body: Value) -> Response {
    if let Value::Object(m) = &mut body {
        m.insert("version".into(), s.version().into());
        m.insert("history_length".into(), s.history_len().into());
    }
    stamped(Json(body).into_response(), s)
}

fn body_bytes(body: Result<Bytes, BytesRejection>, limit: usize) -> Result<Bytes, ApiError> {
    body.map_err(|r| {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::too_large(limit)
        } else {
            ApiError::validation("bad_body", r.body_text())
        }
    })
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v)
        .map_err(|r| ApiError::validation("invalid_json", r.body_text()))
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn techniques() -> Json<Value> {
    let rows: Vec<Value> = attribute_registry()
        .iter()
        .map(|p| {
            json!({
                "technique": p.technique,
                "slug": p.technique.slug(),
                "display_name": p.technique.display_name(),
                "uses_generator": p.technique.uses_generator(),
                "attributes": p,
                "default_params": TechniqueParams::default_for(p.technique).to_json(),
            })
        })
        .collect();
    Json(Value::Array(rows))
}

async fn create_session(State(st): State<AppState>) -> Response {
    let (id, version) = st.store.create();
    info!(session = %id, "session created");
    let mut resp = (
        StatusCode::CREATED,
        Json(json!({"id": id, "version": version, "history_length": 0})),
    )
        .into_response();
    resp.headers_mut().insert(VERSION_HEADER, HeaderValue::from(version));
    resp.headers_mut().insert(HISTORY_HEADER, HeaderValue::from(0u64));
    resp
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    if st.store.remove(&id) {
        Ok(StatusCode::NO_CONTENT.into_response())
    } else {
        Err(ApiError::unknown_session(&id))
    }
}

async fn session_state(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let s = slot.lock();
    let ctx = s.context();
    let img = s.current().ok();
    let body = json!({
        "id": s.id(),
        "busy": slot.is_busy(),
        "redo_length": s.redo_len(),
        "image": img.map(|i| json!({"width": i.width(), "height": i.height(), "sha256": i.content_hash()})),
        "has_report": s.report().is_some(),
        "context": {
            "intent": ctx.sharing_intent,
            "concern": ctx.privacy_concern,
            "concern_mask": ctx.active_concern_mask().is_some(),
        },
        "edits": s.edits().collect::<Vec<_>>(),
    });
    Ok(json_mutation(&s, body))
}

async fn upload_image(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let bytes = body_bytes(body, st.max_image_bytes)?;
    let slot = st.store.get(&id)?;
    blocking(move || {
        let _g = slot.begin()?;
        let img = load_image(&bytes, None)?;
        let mut s = slot.lock();
        let info = json!({"width": img.width(), "height": img.height(), "sha256": img.content_hash()});
        s.load_image(img);
        Ok(json_mutation(&s, info))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextBody {
    #[serde(default)]
    intent: Option<String>,
    #[serde(default)]
    concern: Option<String>,
}

async fn put_context(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ContextBody>, JsonRejection>,
) -> ApiResult {
    let b = json_body(body)?;
    let slot = st.store.get(&id)?;
    let _g = slot.begin()?;
    let mut s = slot.lock();
    s.set_text_context(b.intent, b.concern);
    Ok(json_mutation(&s, json!({})))
}

async fn put_annotation(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let bytes = body_bytes(body, st.max_image_bytes)?;
    let slot = st.store.get(&id)?;
    blocking(move || {
        let _g = slot.begin()?;
        let mut s = slot.lock();
        // A colour upload is the image with green strokes painted on it.
        let mask = if is_color_image(&bytes)? {
            mask_from_green_annotation(&load_image(&bytes, None)?, s.current()?)?
        } else {
            decode_mask_png(&bytes)?
        };
        let selected = mask.count();
        s.set_concern_mask(Some(mask))?;
        Ok(json_mutation(&s, json!({"selected_pixels": selected})))
    })
    .await
}

async fn delete_annotation(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let _g = slot.begin()?;
    let mut s = slot.lock();
    s.set_concern_mask(None)?;
    Ok(json_mutation(&s, json!({})))
}

async fn analyze(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let backends = st.backends.clone();
    blocking(move || {
        let _g = slot.begin()?;
        let (img, ctx) = slot.lock().analysis_input()?;
        let analysis = analyze_image(&img, &ctx, &backends)?;
        let mut s = slot.lock();
        s.install_analysis(analysis);
        let text = s.report().expect("installed").to_canonical_json();
        let resp = ([(header::CONTENT_TYPE, "application/json")], text).into_response();
        Ok(stamped(resp, &s))
    })
    .await
}

async fn get_report(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let s = slot.lock();
    let report = s.report().ok_or(veil_core::pipeline::PipelineError::NoReport)?;
    let resp = ([(header::CONTENT_TYPE, "application/json")], report.to_canonical_json()).into_response();
    Ok(stamped(resp, &s))
}

#[derive(Serialize)]
struct SelectionView<'a> {
    #[serde(flatten)]
    location: &'a ElementLocation,
    warning: Option<String>,
}

async fn locate(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let backends = st.backends.clone();
    blocking(move || {
        let _g = slot.begin()?;
        let (img, report) = slot.lock().locate_input()?;
        let found = locate_elements(&img, &report.elements, &backends)?;
        let mut s = slot.lock();
        s.install_locations(found);
        let views: Vec<_> = s
            .selections()
            .values()
            .map(|l| SelectionView {
                location: l,
                warning: l.warning(),
            })
            .collect();
        let body = json!({ "selections": views });
        Ok(json_mutation(&s, body))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyBody {
    #[serde(default)]
    risk_id: Option<u32>,
    #[serde(default)]
    element_id: Option<u32>,
    technique: String,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    instance: Option<usize>,
    /// Base64 1-bit PNG.
    #[serde(default)]
    mask: Option<String>,
}

fn decode_mask_field(b64: &str) -> Result<RegionMask, ApiError> {
    let bytes = B64
        .decode(b64.trim())
        .map_err(|e| ApiError::validation("invalid_mask", format!("mask is not base64: {e}")))?;
    Ok(decode_mask_png(&bytes)?)
}

async fn apply(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ApplyBody>, JsonRejection>,
) -> ApiResult {
    let b = json_body(body)?;
    let technique: ObfuscationTechnique = b
        .technique
        .parse()
        .map_err(|e: veil_core::risk::RiskError| ApiError::validation("unknown_technique", e.to_string()))?;
    let params = TechniqueParams::from_json(technique, &b.params)?;
    let mask = b.mask.as_deref().map(decode_mask_field).transpose()?;
    let slot = st.store.get(&id)?;
    let backends = st.backends.clone();
    blocking(move || {
        let _g = slot.begin()?;
        let mut s = slot.lock();
        let record = match (b.element_id, mask, b.instance) {
            (Some(_), Some(_), Some(_)) => {
                return Err(ApiError::validation(
                    "invalid_target",
                    "give either instance or mask, not both",
                ))
            }
            (Some(el), Some(m), None) => {
                s.apply_recommendation(b.risk_id, el, params, ElementSelection::Custom(m), &backends)?
            }
            (Some(el), None, Some(i)) => {
                s.apply_recommendation(b.risk_id, el, params, ElementSelection::Instance(i), &backends)?
            }
            (Some(el), None, None) => {
                s.apply_recommendation(b.risk_id, el, params, ElementSelection::AllInstances, &backends)?
            }
            (None, Some(m), None) if b.risk_id.is_none() => s.apply_adhoc(params, m, &backends)?,
            (None, None, _) => return Err(ApiError::validation("invalid_target", "give element_id or a mask")),
            (None, _, _) => {
                return Err(ApiError::validation(
                    "invalid_target",
                    "risk_id and instance need an element_id",
                ))
            }
        };
        Ok(json_mutation(&s, json!({ "record": record })))
    })
    .await
}

async fn undo(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let _g = slot.begin()?;
    let mut s = slot.lock();
    let record = s.undo()?.clone();
    Ok(json_mutation(&s, json!({ "undone": record })))
}

async fn redo(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    let _g = slot.begin()?;
    let mut s = slot.lock();
    let record = s.redo()?.clone();
    Ok(json_mutation(&s, json!({ "redone": record })))
}

async fn current_image(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = st.store.get(&id)?;
    blocking(move || {
        let s = slot.lock();
        let png = save_image(s.current()?, ImageFormat::Png)?;
        let resp = ([(header::CONTENT_TYPE, "image/png")], png).into_response();
        Ok(stamped(resp, &s))
    })
    .await
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<ImageFormat>,
}

/// Boundary used by the export route.
pub const EXPORT_BOUNDARY: &str = "veil-export-boundary";

fn multipart(parts: &[(&str, &str, &[u8])]) -> Vec<u8> {
    let mut out = Vec::new();
    for (ctype, filename, bytes) in parts {
        out.extend_from_slice(format!("--{EXPORT_BOUNDARY}\r\n").as_bytes());
        out.extend_from_slice(format!("Content-Type: {ctype}\r\n").as_bytes());
        out.extend_from_slice(format!("Content-Disposition: attachment; filename=\"{filename}\"\r\n\r\n").as_bytes());
        out.extend_from_slice(bytes);
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(format!("--{EXPORT_BOUNDARY}--\r\n").as_bytes());
    out
}

async fn export(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult {
    let slot = st.store.get(&id)?;
    blocking(move || {
        let s = slot.lock();
        let format = q.format.unwrap_or(ImageFormat::Png);
        let out = s.export(format)?;
        let name = match format {
            ImageFormat::Png => "export.png",
            ImageFormat::Jpeg => "export.jpg",
        };
        let sidecar = out.sidecar_json();
        let body = multipart(&[
            (format.mime(), name, &out.image),
            ("application/json", "sidecar.json", sidecar.as_bytes()),
        ]);
        let ctype = format!("multipart/mixed; boundary={EXPORT_BOUNDARY}");
        let resp = ([(header::CONTENT_TYPE, ctype)], Body::from(body)).into_response();
        Ok(stamped(resp, &s))
    })
    .await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such route")
}

pub fn router(state: AppState) -> Router {
    let limit = state.max_image_bytes;
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/techniques", get(techniques))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_state).delete(delete_session))
        .route("/v1/sessions/{id}/image", post(upload_image))
        .route("/v1/sessions/{id}/image/current", get(current_image))
        .route("/v1/sessions/{id}/context", put(put_context))
        .route(
            "/v1/sessions/{id}/annotation",
            put(put_annotation).delete(delete_annotation),
        )
        .route("/v1/sessions/{id}/analyze", post(analyze))
        .route("/v1/sessions/{id}/report", get(get_report))
        .route("/v1/sessions/{id}/locate", post(locate))
        .route("/v1/sessions/{id}/apply", post(apply))
        .route("/v1/sessions/{id}/undo", post(undo))
        .route("/v1/sessions/{id}/redo", post(redo))
        .route("/v1/sessions/{id}/export", get(export))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(limit))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
/// Idle sessions are swept in the background.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let store = state.store.clone();
    let period = (store.ttl() / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    let sweeper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = store.sweep(Instant::now());
            if n > 0 {
                info!(expired = n, "swept idle sessions");
            }
        }
    });
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await;
    sweeper.abort();
    result
}
