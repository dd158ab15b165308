//! Clients for the external model roles.
//!
//! Each role is a small object-safe trait. [`Backends`] bundles one optional
//! implementation per role and enforces the call contracts (preconditions,
//! sorting, clamping, size checks) so HTTP clients and mocks only have to
//! move bytes.

pub mod config;
pub mod http;
pub mod mock;
mod pose;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptBundle;
use crate::raster::{BoundingBox, Contour, ImageBuffer, RasterError, RegionMask};

pub use config::{BackendConfig, ConfigError, ConfigFile, ServiceSettings};
pub use http::HttpBackend;
pub use mock::{MockChat, MockDetector, MockGenerator, MockGrounder, MockPose, MockSegmenter, MockSet};
pub use pose::{Keypoint, PoseKeypoints, COCO_KEYPOINT_NAMES, COCO_SKELETON, KEYPOINT_COUNT};

/// Fraction by which a segmentation may spill over its prompt box.
pub const SEGMENT_SLACK: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendRole {
    Chat,
    Detector,
    Grounder,
    Segmenter,
    Pose,
    Generator,
}

impl BackendRole {
    pub const ALL: [BackendRole; 6] = [
        BackendRole::Chat,
        BackendRole::Detector,
        BackendRole::Grounder,
        BackendRole::Segmenter,
        BackendRole::Pose,
        BackendRole::Generator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendRole::Chat => "chat",
            BackendRole::Detector => "detector",
            BackendRole::Grounder => "grounder",
            BackendRole::Segmenter => "segmenter",
            BackendRole::Pose => "pose",
            BackendRole::Generator => "generator",
        }
    }
}

impl fmt::Display for BackendRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.as_str();
        let mut c = s.chars();
        let first = c.next().expect("non-empty").to_ascii_uppercase();
        write!(f, "{first}{}", c.as_str())
    }
}

impl std::str::FromStr for BackendRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BackendRole::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown backend role {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("generation refused: {0}")]
    SafetyRejection(String),
    #[error("no person found in the box")]
    NoPersonDetected,
    #[error("degenerate result: {0}")]
    DegenerateResult(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no {0} backend configured")]
    Missing(BackendRole),
    #[error("no mock fixture for {0}")]
    MissingFixture(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl BackendError {
    /// Stable machine tag.
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Transport(_) => "transport",
            BackendError::Timeout => "timeout",
            BackendError::AuthFailure(_) => "auth_failure",
            BackendError::Status { .. } => "backend_error",
            BackendError::Malformed(_) => "malformed_response",
            BackendError::SafetyRejection(_) => "safety_rejection",
            BackendError::NoPersonDetected => "no_person_detected",
            BackendError::DegenerateResult(_) => "degenerate_result",
            BackendError::Precondition(_) => "precondition",
            BackendError::Missing(_) => "backend_missing",
            BackendError::MissingFixture(_) => "missing_fixture",
            BackendError::Raster(RasterError::DimensionMismatch { .. }) => "dimension_mismatch",
            BackendError::Raster(RasterError::EmptyMask) => "empty_mask",
            BackendError::Raster(_) => "image_error",
        }
    }

    /// Worth another attempt: the request may never have reached the model.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::Timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundedBox {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// Inputs of one fill request.
#[derive(Debug, Clone, Copy)]
pub struct FillRequest<'a> {
    pub image: &'a ImageBuffer,
    pub mask: &'a RegionMask,
    pub prompt: &'a str,
    pub reference: Option<&'a ImageBuffer>,
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError>;
}

pub trait ObjectDetector: Send + Sync {
    fn detect(&self, img: &ImageBuffer) -> Result<Vec<Detection>, BackendError>;
}

pub trait PhraseGrounder: Send + Sync {
    fn ground(&self, img: &ImageBuffer, phrase: &str) -> Result<Vec<GroundedBox>, BackendError>;
}

pub trait Segmenter: Send + Sync {
    fn segment(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<Contour, BackendError>;
}

pub trait PoseEstimator: Send + Sync {
    fn estimate(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<PoseKeypoints, BackendError>;
}

pub trait FillGenerator: Send + Sync {
    fn generate(&self, req: FillRequest<'_>) -> Result<ImageBuffer, BackendError>;
}

/// One optional client per role.
#[derive(Clone, Default)]
pub struct Backends {
    pub chat: Option<Arc<dyn ChatModel>>,
    pub detector: Option<Arc<dyn ObjectDetector>>,
    pub grounder: Option<Arc<dyn PhraseGrounder>>,
    pub segmenter: Option<Arc<dyn Segmenter>>,
    pub pose: Option<Arc<dyn PoseEstimator>>,
    pub generator: Option<Arc<dyn FillGenerator>>,
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends")
            .field("chat", &self.chat.is_some())
            .field("detector", &self.detector.is_some())
            .field("grounder", &self.grounder.is_some())
            .field("segmenter", &self.segmenter.is_some())
            .field("pose", &self.pose.is_some())
            .field("generator", &self.generator.is_some())
            .finish()
    }
}

fn require<T: ?Sized>(slot: &Option<Arc<T>>, role: BackendRole) -> Result<&T, BackendError> {
    slot.as_deref().ok_or(BackendError::Missing(role))
}

fn check_box(img: &ImageBuffer, bbox: BoundingBox) -> Result<(), BackendError> {
    if bbox.is_empty() {
        return Err(BackendError::Precondition(format!("box {bbox:?} has zero area")));
    }
    if !bbox.fits_within(img.width(), img.height()) {
        return Err(BackendError::Precondition(format!(
            "box {bbox:?} lies outside the image"
        )));
    }
    Ok(())
}

fn check_confidence(c: f64) -> Result<(), BackendError> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(BackendError::Malformed(format!("confidence {c} outside [0, 1]")))
    }
}

impl Backends {
    /// HTTP clients for every role present in the config; absent roles stay
    /// unset.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, BackendError> {
        let mut b = Backends::default();
        for (role, c) in &cfg.backends {
            let client = Arc::new(HttpBackend::new(c.clone())?);
            match role {
                BackendRole::Chat => b.chat = Some(client),
                BackendRole::Detector => b.detector = Some(client),
                BackendRole::Grounder => b.grounder = Some(client),
                BackendRole::Segmenter => b.segmenter = Some(client),
                BackendRole::Pose => b.pose = Some(client),
                BackendRole::Generator => b.generator = Some(client),
            }
        }
        Ok(b)
    }

    pub fn has(&self, role: BackendRole) -> bool {
        match role {
            BackendRole::Chat => self.chat.is_some(),
            BackendRole::Detector => self.detector.is_some(),
            BackendRole::Grounder => self.grounder.is_some(),
            BackendRole::Segmenter => self.segmenter.is_some(),
            BackendRole::Pose => self.pose.is_some(),
            BackendRole::Generator => self.generator.is_some(),
        }
    }

    pub fn chat_multimodal(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        require(&self.chat, BackendRole::Chat)?.complete(bundle)
    }

    /// Boxes that stick out of the frame are clipped; ones left empty are dropped.
    pub fn detect_objects(&self, img: &ImageBuffer) -> Result<Vec<Detection>, BackendError> {
        let raw = require(&self.detector, BackendRole::Detector)?.detect(img)?;
        let mut out = Vec::with_capacity(raw.len());
        for d in raw {
            check_confidence(d.confidence)?;
            if let Some(bbox) = d.bbox.clamped(img.width(), img.height()) {
                out.push(Detection { bbox, ..d });
            }
        }
        Ok(out)
    }

    /// All instances, highest confidence first.
    pub fn ground_phrase(&self, img: &ImageBuffer, phrase: &str) -> Result<Vec<GroundedBox>, BackendError> {
        if phrase.trim().is_empty() {
            return Err(BackendError::Precondition("empty grounding phrase".into()));
        }
        let raw = require(&self.grounder, BackendRole::Grounder)?.ground(img, phrase.trim())?;
        let mut out = Vec::with_capacity(raw.len());
        for g in raw {
            check_confidence(g.confidence)?;
            if let Some(bbox) = g.bbox.clamped(img.width(), img.height()) {
                out.push(GroundedBox { bbox, ..g });
            }
        }
        out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        Ok(out)
    }

    /// The returned contour never leaves the prompt box grown by [`SEGMENT_SLACK`].
    pub fn segment(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<Contour, BackendError> {
        check_box(img, bbox)?;
        let raw = require(&self.segmenter, BackendRole::Segmenter)?.segment(img, bbox)?;
        let (x0, y0, x1, y1) = bbox.expanded(SEGMENT_SLACK);
        let (w, h) = (img.width() as f64, img.height() as f64);
        raw.clamped_to(x0.max(0.0), y0.max(0.0), x1.min(w), y1.min(h))
            .map_err(|e| BackendError::DegenerateResult(e.to_string()))
    }

    pub fn estimate_pose(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<PoseKeypoints, BackendError> {
        check_box(img, bbox)?;
        let raw = require(&self.pose, BackendRole::Pose)?.estimate(img, bbox)?;
        Ok(raw.hide_outside(img.width(), img.height()))
    }

    pub fn generate_fill(
        &self,
        img: &ImageBuffer,
        mask: &RegionMask,
        prompt: &str,
        reference: Option<&ImageBuffer>,
    ) -> Result<ImageBuffer, BackendError> {
        mask.ensure_matches(img)?;
        if mask.is_empty() {
            return Err(RasterError::EmptyMask.into());
        }
        let generator = require(&self.generator, BackendRole::Generator)?;
        let out = generator.generate(FillRequest {
            image: img,
            mask,
            prompt,
            reference,
        })?;
        out.ensure_same_dims(img.width(), img.height())?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Point;

    fn img(w: u32, h: u32) -> ImageBuffer {
        ImageBuffer::filled(w, h, [10, 20, 30, 255]).unwrap()
    }

    #[test]
    fn config_roles_become_clients() {
        let cfg = ConfigFile::parse(
            r#"
[backends.chat]
endpoint = "http://127.0.0.1:9/v1/chat/completions"
[backends.generator]
endpoint = "http://127.0.0.1:9/fill"
"#,
        )
        .unwrap();
        let b = Backends::from_config(&cfg).unwrap();
        assert!(b.has(BackendRole::Chat) && b.has(BackendRole::Generator));
        assert!(!b.has(BackendRole::Pose));
    }

    struct FixedGrounder(Vec<GroundedBox>);

    impl PhraseGrounder for FixedGrounder {
        fn ground(&self, _: &ImageBuffer, _: &str) -> Result<Vec<GroundedBox>, BackendError> {
            Ok(self.0.clone())
        }
    }

    struct WildSegmenter;

    impl Segmenter for WildSegmenter {
        fn segment(&self, _: &ImageBuffer, _: BoundingBox) -> Result<Contour, BackendError> {
            Ok(Contour::new(vec![
                Point::new(-50.0, -50.0),
                Point::new(500.0, 0.0),
                Point::new(0.0, 500.0),
            ])
            .unwrap())
        }
    }

    struct BadDetector;

    impl ObjectDetector for BadDetector {
        fn detect(&self, _: &ImageBuffer) -> Result<Vec<Detection>, BackendError> {
            Ok(vec![Detection {
                label: "cup".into(),
                bbox: BoundingBox::new(0, 0, 2, 2),
                confidence: 1.5,
            }])
        }
    }

    #[test]
    fn missing_role() {
        let b = Backends::default();
        assert_eq!(
            b.detect_objects(&img(4, 4)).unwrap_err(),
            BackendError::Missing(BackendRole::Detector)
        );
        assert_eq!(
            BackendError::Missing(BackendRole::Pose).to_string(),
            "no Pose backend configured"
        );
    }

    #[test]
    fn grounding_sorted_and_clipped() {
        let b = Backends {
            grounder: Some(Arc::new(FixedGrounder(vec![
                GroundedBox {
                    bbox: BoundingBox::new(0, 0, 4, 4),
                    confidence: 0.2,
                },
                GroundedBox {
                    bbox: BoundingBox::new(6, 6, 10, 10),
                    confidence: 0.9,
                },
                GroundedBox {
                    bbox: BoundingBox::new(20, 20, 4, 4),
                    confidence: 0.5,
                },
            ]))),
            ..Default::default()
        };
        let got = b.ground_phrase(&img(10, 10), "person").unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].bbox, BoundingBox::new(6, 6, 4, 4));
        assert_eq!(got[1].confidence, 0.2);
        assert!(matches!(
            b.ground_phrase(&img(10, 10), "  ").unwrap_err(),
            BackendError::Precondition(_)
        ));
    }

    #[test]
    fn segmentation_is_clamped_to_slack_box() {
        let b = Backends {
            segmenter: Some(Arc::new(WildSegmenter)),
            ..Default::default()
        };
        let c = b.segment(&img(100, 100), BoundingBox::new(10, 10, 20, 20)).unwrap();
        let (x0, y0, x1, y1) = c.bounds();
        assert!(x0 >= 8.0 && y0 >= 8.0 && x1 <= 32.0 && y1 <= 32.0, "{:?}", c.bounds());
        assert!(matches!(
            b.segment(&img(100, 100), BoundingBox::new(10, 10, 0, 5)).unwrap_err(),
            BackendError::Precondition(_)
        ));
    }

    #[test]
    fn confidence_out_of_range_is_malformed() {
        let b = Backends {
            detector: Some(Arc::new(BadDetector)),
            ..Default::default()
        };
        assert!(matches!(
            b.detect_objects(&img(4, 4)).unwrap_err(),
            BackendError::Malformed(_)
        ));
    }

    #[test]
    fn role_names_round_trip() {
        for r in BackendRole::ALL {
            assert_eq!(r.as_str().parse::<BackendRole>().unwrap(), r);
        }
    }
}
