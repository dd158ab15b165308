//! JSON-over-HTTP clients. The chat role speaks the OpenAI-compatible
//! chat-completions format; the other roles use the small contracts in
//! `docs/backends.md`. Images always travel as base64 PNG.

use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    BackendConfig, BackendError, BackendRole, ChatModel, Detection, FillGenerator, FillRequest, GroundedBox,
    ObjectDetector, PhraseGrounder, PoseEstimator, PoseKeypoints, Segmenter,
};
use crate::prompt::PromptBundle;
use crate::raster::{encode_mask_png, load_image, save_image, BoundingBox, Contour, ImageBuffer, ImageFormat};

const RETRY_BACKOFF: Duration = Duration::from_millis(50);

/// A client for one configured role.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    cfg: BackendConfig,
    client: Client,
}

pub(crate) fn png_base64(img: &ImageBuffer) -> Result<String, BackendError> {
    Ok(B64.encode(save_image(img, ImageFormat::Png)?))
}

fn decode_image(b64: &str) -> Result<ImageBuffer, BackendError> {
    let bytes = B64
        .decode(b64.trim())
        .map_err(|e| BackendError::Malformed(format!("image is not base64: {e}")))?;
    load_image(&bytes, None).map_err(|e| BackendError::Malformed(format!("image does not decode: {e}")))
}

fn from_value<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, BackendError> {
    serde_json::from_value(v).map_err(|e| BackendError::Malformed(e.to_string()))
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { cfg, client })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    fn token(&self) -> Result<Option<String>, BackendError> {
        match &self.cfg.token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::AuthFailure(format!("environment variable {var} is not set"))),
        }
    }

    fn attempt(&self, body: &Value, token: Option<&str>) -> Result<Value, BackendError> {
        let mut req = self.client.post(self.cfg.endpoint.clone()).json(body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::AuthFailure(format!("status {}", status.as_u16())));
        }
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("response is not JSON: {e}")))
    }

    /// POSTs `body`, retrying transport failures and timeouts up to
    /// `retry_count` more times.
    pub fn post_json(&self, body: &Value) -> Result<Value, BackendError> {
        let token = self.token()?;
        let mut tries = 0;
        loop {
            tries += 1;
            match self.attempt(body, token.as_deref()) {
                Err(e) if e.is_retryable() && tries <= self.cfg.retry_count => {
                    tracing::warn!(role = %self.cfg.role, attempt = tries, error = %e, "retrying backend call");
                    thread::sleep(RETRY_BACKOFF * tries);
                }
                other => return other,
            }
        }
    }

    fn expect_role(&self, role: BackendRole) -> Result<(), BackendError> {
        if self.cfg.role == role {
            Ok(())
        } else {
            Err(BackendError::Precondition(format!(
                "client configured for {} used as {role}",
                self.cfg.role
            )))
        }
    }
}

/// Request body for the chat role.
pub fn chat_request_body(bundle: &PromptBundle, model: Option<&str>) -> Result<Value, BackendError> {
    let mut content = vec![json!({"type": "text", "text": bundle.text})];
    for (_, img) in &bundle.images {
        content.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:image/png;base64,{}", png_base64(img)?)}
        }));
    }
    let mut body = json!({
        "temperature": 0,
        "messages": [{"role": "user", "content": content}],
    });
    if let Some(m) = model {
        body["model"] = json!(m);
    }
    Ok(body)
}

fn chat_text(resp: &Value) -> Result<String, BackendError> {
    let content = resp
        .pointer("/choices/0/message/content")
        .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        other => Err(BackendError::Malformed(format!("unexpected content {other}"))),
    }
}

impl ChatModel for HttpBackend {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        self.expect_role(BackendRole::Chat)?;
        let body = chat_request_body(bundle, self.cfg.model.as_deref())?;
        chat_text(&self.post_json(&body)?)
    }
}

#[derive(Deserialize)]
struct DetectResponse {
    detections: Vec<Detection>,
}

impl ObjectDetector for HttpBackend {
    fn detect(&self, img: &ImageBuffer) -> Result<Vec<Detection>, BackendError> {
        self.expect_role(BackendRole::Detector)?;
        let resp = self.post_json(&json!({"image": png_base64(img)?}))?;
        Ok(from_value::<DetectResponse>(resp)?.detections)
    }
}

#[derive(Deserialize)]
struct GroundResponse {
    boxes: Vec<GroundedBox>,
}

impl PhraseGrounder for HttpBackend {
    fn ground(&self, img: &ImageBuffer, phrase: &str) -> Result<Vec<GroundedBox>, BackendError> {
        self.expect_role(BackendRole::Grounder)?;
        let resp = self.post_json(&json!({"image": png_base64(img)?, "phrase": phrase}))?;
        Ok(from_value::<GroundResponse>(resp)?.boxes)
    }
}

#[derive(Deserialize)]
struct SegmentResponse {
    contour: Value,
}

impl Segmenter for HttpBackend {
    fn segment(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<Contour, BackendError> {
        self.expect_role(BackendRole::Segmenter)?;
        let resp = self.post_json(&json!({"image": png_base64(img)?, "box": bbox}))?;
        let raw = from_value::<SegmentResponse>(resp)?.contour;
        serde_json::from_value(raw).map_err(|e| BackendError::DegenerateResult(e.to_string()))
    }
}

#[derive(Deserialize)]
struct PoseResponse {
    person_found: bool,
    #[serde(default)]
    keypoints: Option<PoseKeypoints>,
}

impl PoseEstimator for HttpBackend {
    fn estimate(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<PoseKeypoints, BackendError> {
        self.expect_role(BackendRole::Pose)?;
        let resp = self.post_json(&json!({"image": png_base64(img)?, "box": bbox}))?;
        let r: PoseResponse = from_value(resp)?;
        match (r.person_found, r.keypoints) {
            (false, _) => Err(BackendError::NoPersonDetected),
            (true, Some(k)) => Ok(k),
            (true, None) => Err(BackendError::Malformed("person_found without keypoints".into())),
        }
    }
}

#[derive(Deserialize)]
struct FillResponse {
    image: Option<String>,
    #[serde(default)]
    rejected: bool,
    reason: Option<String>,
}

/// Request body for the generator role.
pub fn fill_request_body(req: &FillRequest<'_>) -> Result<Value, BackendError> {
    let mut body = json!({
        "image": png_base64(req.image)?,
        "mask": B64.encode(encode_mask_png(req.mask)?),
        "prompt": req.prompt,
    });
    if let Some(r) = req.reference {
        body["reference_image"] = json!(png_base64(r)?);
    }
    Ok(body)
}

impl FillGenerator for HttpBackend {
    fn generate(&self, req: FillRequest<'_>) -> Result<ImageBuffer, BackendError> {
        self.expect_role(BackendRole::Generator)?;
        let resp: FillResponse = from_value(self.post_json(&fill_request_body(&req)?)?)?;
        if resp.rejected {
            return Err(BackendError::SafetyRejection(
                resp.reason.unwrap_or_else(|| "no reason given".into()),
            ));
        }
        decode_image(
            resp.image
                .as_deref()
                .ok_or_else(|| BackendError::Malformed("response has neither image nor rejection".into()))?,
        )
    }
}
