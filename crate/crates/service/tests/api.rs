use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use veil_core::backends::{MockSet, ServiceSettings};
use veil_core::obfuscate::GENERATIVE_DILATION;
use veil_core::raster::{
    dilate_mask, encode_mask_png, load_image, rasterize_contour, save_image, BoundingBox, Contour, ImageBuffer,
    ImageFormat, RegionMask,
};
use veil_service::{router, AppState, EXPORT_BOUNDARY, HISTORY_HEADER, VERSION_HEADER};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/mock")
}

fn family_png() -> Vec<u8> {
    std::fs::read(fixtures().join("family.png")).unwrap()
}

fn state_with(settings: ServiceSettings) -> AppState {
    AppState::new(MockSet::from_fixture_dir(&fixtures()).unwrap().backends(), &settings)
}

fn app() -> Router {
    router(state_with(ServiceSettings::default()))
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    fn version(&self) -> u64 {
        self.headers[VERSION_HEADER].to_str().unwrap().parse().unwrap()
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Vec<u8>>, ctype: &str) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", ctype)
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn post_json(app: &Router, uri: &str, v: Value) -> Reply {
    call(
        app,
        Method::POST,
        uri,
        Some(serde_json::to_vec(&v).unwrap()),
        "application/json",
    )
    .await
}

async fn create(app: &Router) -> String {
    let r = call(app, Method::POST, "/v1/sessions", None, "application/json").await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["id"].as_str().unwrap().to_string()
}

fn split_multipart(body: &[u8]) -> Vec<(String, Vec<u8>)> {
    let delim = format!("--{EXPORT_BOUNDARY}");
    let text = body;
    let mut parts = Vec::new();
    let mut rest = text;
    loop {
        let start = find(rest, delim.as_bytes()).expect("boundary") + delim.len();
        rest = &rest[start..];
        if rest.starts_with(b"--") {
            break;
        }
        let head_end = find(rest, b"\r\n\r\n").unwrap();
        let head = String::from_utf8(rest[..head_end].to_vec()).unwrap();
        let after = &rest[head_end + 4..];
        let end = find(after, format!("\r\n{delim}").as_bytes()).unwrap();
        let ctype = head
            .lines()
            .find_map(|l| l.strip_prefix("Content-Type: "))
            .unwrap()
            .to_string();
        parts.push((ctype, after[..end].to_vec()));
        rest = &after[end + 2..];
    }
    parts
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

#[tokio::test]
async fn healthz() {
    let r = call(&app(), Method::GET, "/v1/healthz", None, "").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "ok");
}

#[tokio::test]
async fn current_before_upload_is_404() {
    let app = app();
    let id = create(&app).await;
    let r = call(&app, Method::GET, &format!("/v1/sessions/{id}/image/current"), None, "").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "image_missing");
}

#[tokio::test]
async fn unknown_session_is_404() {
    let r = call(&app(), Method::POST, "/v1/sessions/nope/analyze", None, "").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "unknown_session");
}

#[tokio::test]
async fn techniques_list() {
    let r = call(&app(), Method::GET, "/v1/techniques", None, "").await;
    let v = r.json();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 9);
    let gen = rows
        .iter()
        .find(|r| r["technique"] == "Generative Replacement")
        .unwrap();
    assert_eq!(gen["attributes"]["detectability"], "Subtle");
    assert_eq!(gen["attributes"]["realism"], "Realistic");
    let blur = rows.iter().find(|r| r["slug"] == "blur").unwrap();
    assert_eq!(blur["attributes"]["detectability"], "Obvious");
}

#[tokio::test]
async fn oversized_upload_is_413() {
    let app = router(state_with(ServiceSettings {
        max_image_bytes: 100,
        ..Default::default()
    }));
    let id = create(&app).await;
    let r = call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/image"),
        Some(family_png()),
        "image/png",
    )
    .await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(r.json()["code"], "image_too_large");
}

#[tokio::test]
async fn garbage_upload_is_422() {
    let app = app();
    let id = create(&app).await;
    let r = call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/image"),
        Some(b"nope".to_vec()),
        "image/png",
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn analyze_while_busy_is_409() {
    let state = state_with(ServiceSettings::default());
    let app = router(state.clone());
    let id = create(&app).await;
    call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/image"),
        Some(family_png()),
        "image/png",
    )
    .await;
    let slot = state.store.get(&id).unwrap();
    let guard = slot.begin().unwrap();
    let r = call(&app, Method::POST, &format!("/v1/sessions/{id}/analyze"), None, "").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["code"], "busy");
    drop(guard);
    let r = call(&app, Method::POST, &format!("/v1/sessions/{id}/analyze"), None, "").await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn annotation_uploads() {
    let app = app();
    let id = create(&app).await;
    call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/image"),
        Some(family_png()),
        "image/png",
    )
    .await;
    let uri = format!("/v1/sessions/{id}/annotation");

    let mask = RegionMask::from_box(96, 64, BoundingBox::new(23, 27, 15, 15)).unwrap();
    let r = call(
        &app,
        Method::PUT,
        &uri,
        Some(encode_mask_png(&mask).unwrap()),
        "image/png",
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["selected_pixels"], 225);

    let wrong = RegionMask::full(8, 8).unwrap();
    let r = call(
        &app,
        Method::PUT,
        &uri,
        Some(encode_mask_png(&wrong).unwrap()),
        "image/png",
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["code"], "dimension_mismatch");

    // the image itself with a painted green stroke
    let mut painted = load_image(&family_png(), None).unwrap();
    for x in 40..50 {
        painted.set_pixel(x, 10, [0, 255, 0, 255]);
    }
    let r = call(
        &app,
        Method::PUT,
        &uri,
        Some(save_image(&painted, ImageFormat::Png).unwrap()),
        "image/png",
    )
    .await;
    assert_eq!(r.json()["selected_pixels"], 10);

    let r = call(&app, Method::DELETE, &uri, None, "").await;
    assert_eq!(r.status, StatusCode::OK);
    let s = call(&app, Method::GET, &format!("/v1/sessions/{id}"), None, "")
        .await
        .json();
    assert_eq!(s["context"]["concern_mask"], false);
}

#[tokio::test]
async fn apply_validation() {
    let app = app();
    let id = create(&app).await;
    call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/image"),
        Some(family_png()),
        "image/png",
    )
    .await;
    let uri = format!("/v1/sessions/{id}/apply");
    let r = post_json(&app, &uri, json!({"technique": "Sparkles", "element_id": 1})).await;
    assert_eq!(
        (r.status, r.json()["code"].clone()),
        (StatusCode::UNPROCESSABLE_ENTITY, json!("unknown_technique"))
    );
    let r = post_json(&app, &uri, json!({"technique": "Blurring"})).await;
    assert_eq!(r.json()["code"], "invalid_target");
    let r = post_json(&app, &uri, json!({"technique": "Blurring", "params": {"sigma": -1}})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = post_json(&app, &uri, json!({"technique": "Blurring", "element_id": 1})).await;
    assert_eq!(
        (r.status, r.json()["code"].clone()),
        (StatusCode::CONFLICT, json!("no_report"))
    );
    let r = call(&app, Method::POST, &format!("/v1/sessions/{id}/undo"), None, "").await;
    assert_eq!(r.json()["code"], "nothing_to_undo");
    let r = post_json(
        &app,
        &format!("/v1/sessions/{id}/context"),
        json!({"intent": "x", "bogus": 1}),
    )
    .await;
    assert_eq!(r.status, StatusCode::METHOD_NOT_ALLOWED);
    let r = call(
        &app,
        Method::PUT,
        &format!("/v1/sessions/{id}/context"),
        Some(br#"{"intent": "x", "bogus": 1}"#.to_vec()),
        "application/json",
    )
    .await;
    assert_eq!(r.json()["code"], "invalid_json");
}

#[tokio::test]
async fn dots_without_pose_is_502() {
    let mut set = MockSet::from_fixture_dir(&fixtures()).unwrap().backends();
    set.pose = None;
    let app = router(AppState::new(set, &ServiceSettings::default()));
    let id = create(&app).await;
    call(
        &app,
        Method::POST,
        &format!("/v1/sessions/{id}/image"),
        Some(family_png()),
        "image/png",
    )
    .await;
    let mask = RegionMask::from_box(96, 64, BoundingBox::new(50, 6, 30, 58)).unwrap();
    let b64 = base64::engine::general_purpose::STANDARD.encode(encode_mask_png(&mask).unwrap());
    let r = post_json(
        &app,
        &format!("/v1/sessions/{id}/apply"),
        json!({"technique": "dots", "mask": b64}),
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_GATEWAY);
    assert_eq!(r.json()["code"], "backend_missing");
}

fn contour_mask(v: &Value, w: u32, h: u32) -> RegionMask {
    let c: Contour = serde_json::from_value(v.clone()).unwrap();
    rasterize_contour(&c, w, h).unwrap()
}

#[tokio::test]
async fn end_to_end_mock_run() {
    let app = app();
    let id = create(&app).await;
    let base = format!("/v1/sessions/{id}");
    let upload = load_image(&family_png(), None).unwrap();

    let r = call(
        &app,
        Method::POST,
        &format!("{base}/image"),
        Some(family_png()),
        "image/png",
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    let mut last = r.version();

    let r = call(
        &app,
        Method::PUT,
        &format!("{base}/context"),
        Some(br#"{"intent": "family chat", "concern": "my baby's face"}"#.to_vec()),
        "application/json",
    )
    .await;
    assert!(r.version() > last);
    last = r.version();

    let r = call(&app, Method::POST, &format!("{base}/analyze"), None, "").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.version() > last);
    last = r.version();
    let report = r.json();
    assert_eq!(report[0]["privacyRisk"], "Reveals your identity");
    assert_eq!(report[0]["sensitiveElements"][0]["element"], "baby face");

    let r = call(&app, Method::POST, &format!("{base}/locate"), None, "").await;
    let sel = r.json();
    assert!(r.version() > last);
    let face = &sel["selections"][0]["instances"][0];
    let window = &sel["selections"][1]["instances"][0];
    let face_mask = contour_mask(&face["contour"], 96, 64);
    let window_mask = contour_mask(&window["contour"], 96, 64);

    let r = post_json(
        &app,
        &format!("{base}/apply"),
        json!({"risk_id": 1, "element_id": 1, "technique": "Blurring", "params": {"sigma": 3}, "instance": 0}),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    assert_eq!(r.json()["history_length"], 1);
    let r = post_json(
        &app,
        &format!("{base}/apply"),
        json!({"risk_id": 2, "element_id": 2, "technique": "Generative Replacement",
               "params": {"prompt": "a plain painted wall"}}),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    assert_eq!(r.headers[HISTORY_HEADER], "2");
    let after_two = call(&app, Method::GET, &format!("{base}/image/current"), None, "")
        .await
        .body;

    let r = call(&app, Method::POST, &format!("{base}/undo"), None, "").await;
    assert_eq!(r.json()["history_length"], 1);
    let r = call(&app, Method::POST, &format!("{base}/redo"), None, "").await;
    assert_eq!(r.json()["history_length"], 2);
    let now = call(&app, Method::GET, &format!("{base}/image/current"), None, "")
        .await
        .body;
    assert_eq!(now, after_two);

    let r = call(&app, Method::GET, &format!("{base}/export"), None, "").await;
    assert_eq!(r.status, StatusCode::OK);
    let parts = split_multipart(&r.body);
    assert_eq!(parts[0].0, "image/png");
    assert_eq!(parts[1].0, "application/json");
    let exported: ImageBuffer = load_image(&parts[0].1, None).unwrap();
    let sidecar: Value = serde_json::from_slice(&parts[1].1).unwrap();
    assert_eq!(sidecar["edits"].as_array().unwrap().len(), 2);
    assert_eq!(sidecar["edits"][1]["generation_prompt"], "a plain painted wall");

    let allowed = face_mask
        .union(&dilate_mask(&window_mask, GENERATIVE_DILATION))
        .unwrap();
    let mut changed = 0;
    for y in 0..64 {
        for x in 0..96 {
            if exported.pixel(x, y) != upload.pixel(x, y) {
                assert!(allowed.get(x, y), "pixel ({x},{y}) changed outside the selections");
                changed += 1;
            }
        }
    }
    assert!(changed > 0);
}
