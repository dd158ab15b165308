//! Deterministic in-process backends driven by fixtures.
//!
//! Image-keyed fixtures use [`ImageBuffer::content_hash`]; the key
//! [`ANY_IMAGE`] matches every image. A fixture directory looks like:
//!
//! ```text
//! <dir>/<image-hash>.json                     detections, groundings, segments, poses
//! <dir>/chat/<bundle-hash>.txt                reply to one exact prompt bundle
//! <dir>/chat/<image-hash>.identification.txt  reply to any identification call on that image
//! <dir>/chat/<image-hash>.recommendation.txt  same for recommendation calls
//! ```

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{
    BackendError, Backends, ChatModel, Detection, FillGenerator, FillRequest, GroundedBox, ObjectDetector,
    PhraseGrounder, PoseEstimator, PoseKeypoints, Segmenter,
};
use crate::prompt::{ImageRole, PromptBundle, ResponseSchema};
use crate::raster::{BoundingBox, Contour, ImageBuffer};

pub const ANY_IMAGE: &str = "*";
pub const CHECKER_CELL: u32 = 4;

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn schema_suffix(s: ResponseSchema) -> &'static str {
    match s {
        ResponseSchema::RiskReportV1 => "identification",
        ResponseSchema::RecommendationSetV1 => "recommendation",
    }
}

fn lookup<'a, V>(map: &'a HashMap<String, V>, img: &ImageBuffer) -> Option<&'a V> {
    map.get(&img.content_hash()).or_else(|| map.get(ANY_IMAGE))
}

/// Replies come from, in order: the script queue, an exact bundle hash, the
/// (original image, schema) pair, then the schema alone.
#[derive(Debug, Default)]
pub struct MockChat {
    by_bundle: HashMap<String, String>,
    by_image: HashMap<(String, ResponseSchema), String>,
    by_schema: HashMap<ResponseSchema, String>,
    script: Mutex<VecDeque<Result<String, BackendError>>>,
    log: Mutex<Vec<String>>,
}

impl MockChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bundle(mut self, bundle_hash: impl Into<String>, reply: impl Into<String>) -> Self {
        self.by_bundle.insert(bundle_hash.into(), reply.into());
        self
    }

    pub fn with_image(
        mut self,
        image_hash: impl Into<String>,
        schema: ResponseSchema,
        reply: impl Into<String>,
    ) -> Self {
        self.by_image.insert((image_hash.into(), schema), reply.into());
        self
    }

    pub fn with_schema(mut self, schema: ResponseSchema, reply: impl Into<String>) -> Self {
        self.by_schema.insert(schema, reply.into());
        self
    }

    /// Queued replies are consumed one per call before any fixture lookup.
    pub fn push_script(&self, reply: Result<String, BackendError>) {
        lock(&self.script).push_back(reply);
    }

    /// Content hashes of every bundle received, in call order.
    pub fn requests(&self) -> Vec<String> {
        lock(&self.log).clone()
    }
}

impl ChatModel for MockChat {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        let hash = bundle.content_hash();
        lock(&self.log).push(hash.clone());
        if let Some(r) = lock(&self.script).pop_front() {
            return r;
        }
        if let Some(r) = self.by_bundle.get(&hash) {
            return Ok(r.clone());
        }
        let schema = bundle.expected_response;
        let original = bundle
            .images
            .iter()
            .find(|(role, _)| *role == ImageRole::Original)
            .map(|(_, img)| img.content_hash());
        if let Some(r) = original.and_then(|h| self.by_image.get(&(h, schema))) {
            return Ok(r.clone());
        }
        self.by_schema
            .get(&schema)
            .cloned()
            .ok_or_else(|| BackendError::MissingFixture(format!("{} bundle {hash}", schema_suffix(schema))))
    }
}

/// Unknown images have no detections.
#[derive(Debug, Default)]
pub struct MockDetector {
    fixtures: HashMap<String, Vec<Detection>>,
}

impl MockDetector {
    pub fn with(mut self, image_hash: impl Into<String>, detections: Vec<Detection>) -> Self {
        self.fixtures.insert(image_hash.into(), detections);
        self
    }
}

impl ObjectDetector for MockDetector {
    fn detect(&self, img: &ImageBuffer) -> Result<Vec<Detection>, BackendError> {
        Ok(lookup(&self.fixtures, img).cloned().unwrap_or_default())
    }
}

/// Phrases are matched case-insensitively; unknown phrases ground nothing.
#[derive(Debug, Default)]
pub struct MockGrounder {
    fixtures: HashMap<String, HashMap<String, Vec<GroundedBox>>>,
    log: Mutex<Vec<String>>,
}

impl MockGrounder {
    pub fn with(mut self, image_hash: impl Into<String>, phrase: &str, boxes: Vec<GroundedBox>) -> Self {
        self.fixtures
            .entry(image_hash.into())
            .or_default()
            .insert(phrase.trim().to_lowercase(), boxes);
        self
    }

    /// Phrases requested so far, in call order.
    pub fn requests(&self) -> Vec<String> {
        lock(&self.log).clone()
    }
}

impl PhraseGrounder for MockGrounder {
    fn ground(&self, img: &ImageBuffer, phrase: &str) -> Result<Vec<GroundedBox>, BackendError> {
        lock(&self.log).push(phrase.to_string());
        let key = phrase.trim().to_lowercase();
        let hit = self
            .fixtures
            .get(&img.content_hash())
            .and_then(|m| m.get(&key))
            .or_else(|| self.fixtures.get(ANY_IMAGE).and_then(|m| m.get(&key)));
        Ok(hit.cloned().unwrap_or_default())
    }
}

/// Returns the prompt box itself unless a fixture contour is stored for it.
#[derive(Debug, Default)]
pub struct MockSegmenter {
    fixtures: HashMap<String, Vec<(BoundingBox, Contour)>>,
}

impl MockSegmenter {
    pub fn with(mut self, image_hash: impl Into<String>, bbox: BoundingBox, contour: Contour) -> Self {
        self.fixtures
            .entry(image_hash.into())
            .or_default()
            .push((bbox, contour));
        self
    }
}

impl Segmenter for MockSegmenter {
    fn segment(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<Contour, BackendError> {
        let stored = lookup(&self.fixtures, img).and_then(|v| v.iter().find(|(b, _)| *b == bbox));
        Ok(stored
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| Contour::from_box(bbox)))
    }
}

/// Boxes without a stored pose contain no person.
#[derive(Debug, Default)]
pub struct MockPose {
    fixtures: HashMap<String, Vec<(BoundingBox, PoseKeypoints)>>,
}

impl MockPose {
    pub fn with(mut self, image_hash: impl Into<String>, bbox: BoundingBox, pose: PoseKeypoints) -> Self {
        self.fixtures.entry(image_hash.into()).or_default().push((bbox, pose));
        self
    }
}

impl PoseEstimator for MockPose {
    fn estimate(&self, img: &ImageBuffer, bbox: BoundingBox) -> Result<PoseKeypoints, BackendError> {
        lookup(&self.fixtures, img)
            .and_then(|v| v.iter().find(|(b, _)| *b == bbox))
            .map(|(_, p)| *p)
            .ok_or(BackendError::NoPersonDetected)
    }
}

/// What the mock generator was asked for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillLogEntry {
    pub prompt: String,
    pub mask_pixels: usize,
    pub reference_hash: Option<String>,
}

/// Paints the whole frame with a two-colour checkerboard seeded by the
/// prompt. Prompts containing a blocked term are refused.
#[derive(Debug, Default)]
pub struct MockGenerator {
    blocked_terms: Vec<String>,
    log: Mutex<Vec<FillLogEntry>>,
}

impl MockGenerator {
    pub fn blocking(mut self, term: &str) -> Self {
        self.blocked_terms.push(term.to_lowercase());
        self
    }

    pub fn requests(&self) -> Vec<FillLogEntry> {
        lock(&self.log).clone()
    }

    /// The two checker colours for `prompt`.
    pub fn palette(prompt: &str) -> ([u8; 4], [u8; 4]) {
        let d = Sha256::digest(prompt.as_bytes());
        ([d[0], d[1], d[2], 255], [d[3], d[4], d[5], 255])
    }

    pub fn checkerboard(width: u32, height: u32, prompt: &str) -> ImageBuffer {
        let (a, b) = Self::palette(prompt);
        let mut out = ImageBuffer::filled(width, height, a).expect("dimensions come from a valid image");
        for y in 0..height {
            for x in 0..width {
                if (x / CHECKER_CELL + y / CHECKER_CELL) % 2 == 1 {
                    out.set_pixel(x, y, b);
                }
            }
        }
        out
    }
}

impl FillGenerator for MockGenerator {
    fn generate(&self, req: FillRequest<'_>) -> Result<ImageBuffer, BackendError> {
        lock(&self.log).push(FillLogEntry {
            prompt: req.prompt.to_string(),
            mask_pixels: req.mask.count(),
            reference_hash: req.reference.map(ImageBuffer::content_hash),
        });
        let lower = req.prompt.to_lowercase();
        if let Some(t) = self.blocked_terms.iter().find(|t| lower.contains(t.as_str())) {
            return Err(BackendError::SafetyRejection(format!("prompt mentions {t:?}")));
        }
        Ok(Self::checkerboard(req.image.width(), req.image.height(), req.prompt))
    }
}

/// All six mocks, kept as concrete handles so tests can inspect request logs.
#[derive(Debug, Clone)]
pub struct MockSet {
    pub chat: Arc<MockChat>,
    pub detector: Arc<MockDetector>,
    pub grounder: Arc<MockGrounder>,
    pub segmenter: Arc<MockSegmenter>,
    pub pose: Arc<MockPose>,
    pub generator: Arc<MockGenerator>,
}

impl Default for MockSet {
    fn default() -> Self {
        Self::new(MockChat::default())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFixture {
    #[serde(rename = "box")]
    bbox: BoundingBox,
    contour: Contour,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFixture {
    #[serde(rename = "box")]
    bbox: BoundingBox,
    keypoints: PoseKeypoints,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageFixture {
    #[serde(default)]
    #[allow(dead_code)]
    image: Option<String>,
    #[serde(default)]
    detections: Vec<Detection>,
    #[serde(default)]
    groundings: HashMap<String, Vec<GroundedBox>>,
    #[serde(default)]
    segments: Vec<SegmentFixture>,
    #[serde(default)]
    poses: Vec<PoseFixture>,
}

fn fixture_error(path: &Path, e: impl std::fmt::Display) -> BackendError {
    BackendError::MissingFixture(format!("{}: {e}", path.display()))
}

impl MockSet {
    pub fn new(chat: MockChat) -> Self {
        Self {
            chat: Arc::new(chat),
            detector: Arc::default(),
            grounder: Arc::default(),
            segmenter: Arc::default(),
            pose: Arc::default(),
            generator: Arc::default(),
        }
    }

    /// Every role filled with its mock.
    pub fn backends(&self) -> Backends {
        Backends {
            chat: Some(self.chat.clone()),
            detector: Some(self.detector.clone()),
            grounder: Some(self.grounder.clone()),
            segmenter: Some(self.segmenter.clone()),
            pose: Some(self.pose.clone()),
            generator: Some(self.generator.clone()),
        }
    }

    /// Loads the layout described in the module docs.
    pub fn from_fixture_dir(dir: &Path) -> Result<Self, BackendError> {
        let mut chat = MockChat::new();
        let mut detector = MockDetector::default();
        let mut grounder = MockGrounder::default();
        let mut segmenter = MockSegmenter::default();
        let mut pose = MockPose::default();

        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| fixture_error(dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .collect();
        entries.sort();
        for path in entries.iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
            let key = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let text = std::fs::read_to_string(path).map_err(|e| fixture_error(path, e))?;
            let f: ImageFixture = serde_json::from_str(&text).map_err(|e| fixture_error(path, e))?;
            if !f.detections.is_empty() {
                detector = detector.with(key.clone(), f.detections);
            }
            for (phrase, boxes) in f.groundings {
                grounder = grounder.with(key.clone(), &phrase, boxes);
            }
            for s in f.segments {
                segmenter = segmenter.with(key.clone(), s.bbox, s.contour);
            }
            for p in f.poses {
                pose = pose.with(key.clone(), p.bbox, p.keypoints);
            }
        }

        let chat_dir = dir.join("chat");
        if chat_dir.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(&chat_dir)
                .map_err(|e| fixture_error(&chat_dir, e))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            for path in files {
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                let reply = std::fs::read_to_string(&path).map_err(|e| fixture_error(&path, e))?;
                chat = match stem.rsplit_once('.') {
                    Some((img, "identification")) => chat.with_image(img, ResponseSchema::RiskReportV1, reply),
                    Some((img, "recommendation")) => chat.with_image(img, ResponseSchema::RecommendationSetV1, reply),
                    Some(_) => return Err(fixture_error(&path, "unknown chat fixture suffix")),
                    None => chat.with_bundle(stem, reply),
                };
            }
        }

        Ok(Self {
            chat: Arc::new(chat),
            detector: Arc::new(detector),
            grounder: Arc::new(grounder),
            segmenter: Arc::new(segmenter),
            pose: Arc::new(pose),
            generator: Arc::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RegionMask;

    fn blank(w: u32, h: u32) -> ImageBuffer {
        ImageBuffer::filled(w, h, [0, 0, 0, 255]).unwrap()
    }

    fn bundle(img: &ImageBuffer, text: &str, schema: ResponseSchema) -> PromptBundle {
        PromptBundle {
            text: text.into(),
            images: vec![(ImageRole::Original, img.clone())],
            expected_response: schema,
        }
    }

    #[test]
    fn chat_lookup_order_and_replay() {
        let img = blank(4, 4);
        let b = bundle(&img, "exact", ResponseSchema::RiskReportV1);
        let chat = MockChat::new()
            .with_bundle(b.content_hash(), "by bundle")
            .with_image(img.content_hash(), ResponseSchema::RiskReportV1, "by image")
            .with_schema(ResponseSchema::RiskReportV1, "by schema");
        assert_eq!(chat.complete(&b).unwrap(), "by bundle");
        assert_eq!(chat.complete(&b).unwrap(), "by bundle");
        assert_eq!(
            chat.complete(&bundle(&img, "other", ResponseSchema::RiskReportV1))
                .unwrap(),
            "by image"
        );
        assert_eq!(
            chat.complete(&bundle(&blank(5, 5), "other", ResponseSchema::RiskReportV1))
                .unwrap(),
            "by schema"
        );
        assert!(matches!(
            chat.complete(&bundle(&img, "x", ResponseSchema::RecommendationSetV1))
                .unwrap_err(),
            BackendError::MissingFixture(_)
        ));
        chat.push_script(Err(BackendError::Timeout));
        assert_eq!(chat.complete(&b).unwrap_err(), BackendError::Timeout);
        assert_eq!(chat.requests().len(), 6);
    }

    #[test]
    fn blank_image_has_no_detections() {
        let set = MockSet::default();
        assert!(set.backends().detect_objects(&blank(8, 8)).unwrap().is_empty());
    }

    #[test]
    fn segmenter_default_is_the_box() {
        let set = MockSet::default();
        let c = set
            .backends()
            .segment(&blank(20, 20), BoundingBox::new(2, 3, 5, 6))
            .unwrap();
        assert_eq!(c.points().len(), 4);
        assert_eq!(c.bounds(), (2.0, 3.0, 7.0, 9.0));
    }

    #[test]
    fn pose_without_fixture_is_no_person() {
        let set = MockSet::default();
        assert_eq!(
            set.backends()
                .estimate_pose(&blank(20, 20), BoundingBox::new(0, 0, 5, 5))
                .unwrap_err(),
            BackendError::NoPersonDetected
        );
    }

    #[test]
    fn generator_contract() {
        let set = MockSet::new(MockChat::new());
        let b = set.backends();
        let img = blank(8, 8);
        let mut mask = RegionMask::new(8, 8).unwrap();
        mask.set(1, 1, true);
        let one = b.generate_fill(&img, &mask, "a tree", None).unwrap();
        let again = b.generate_fill(&img, &mask, "a tree", None).unwrap();
        let other = b.generate_fill(&img, &mask, "a lamp", None).unwrap();
        assert_eq!(one, again);
        assert_ne!(one, other);
        assert_eq!(one.pixel(0, 0), MockGenerator::palette("a tree").0);
        assert_eq!(one.pixel(4, 0), MockGenerator::palette("a tree").1);

        let empty = RegionMask::new(8, 8).unwrap();
        assert!(b.generate_fill(&img, &empty, "x", None).is_err());
        let wrong = RegionMask::full(4, 4).unwrap();
        assert!(matches!(
            b.generate_fill(&img, &wrong, "x", None).unwrap_err(),
            BackendError::Raster(crate::raster::RasterError::DimensionMismatch { .. })
        ));

        b.generate_fill(&img, &mask, "with ref", Some(&img)).unwrap();
        let log = set.generator.requests();
        assert_eq!(log.last().unwrap().reference_hash, Some(img.content_hash()));
        assert_eq!(log[0].reference_hash, None);
    }

    #[test]
    fn blocked_prompts_are_refused() {
        let g = MockGenerator::default().blocking("weapon");
        let img = blank(4, 4);
        let mask = RegionMask::full(4, 4).unwrap();
        let err = g
            .generate(FillRequest {
                image: &img,
                mask: &mask,
                prompt: "a Weapon",
                reference: None,
            })
            .unwrap_err();
        assert!(matches!(err, BackendError::SafetyRejection(_)));
    }

    #[test]
    fn fixture_dir_loading() {
        let dir = tempfile::tempdir().unwrap();
        let img = blank(16, 16);
        let h = img.content_hash();
        std::fs::write(
            dir.path().join(format!("{h}.json")),
            r#"{"image": "blank.png",
                "detections": [{"label": "cup", "box": {"x": 1, "y": 1, "w": 4, "h": 4}, "confidence": 0.7}],
                "groundings": {"Cup": [{"box": {"x": 1, "y": 1, "w": 4, "h": 4}, "confidence": 0.7}]}}"#,
        )
        .unwrap();
        std::fs::create_dir(dir.path().join("chat")).unwrap();
        std::fs::write(dir.path().join("chat").join(format!("{h}.identification.txt")), "[]").unwrap();
        let set = MockSet::from_fixture_dir(dir.path()).unwrap();
        let b = set.backends();
        assert_eq!(b.detect_objects(&img).unwrap().len(), 1);
        assert_eq!(b.ground_phrase(&img, "cup").unwrap().len(), 1);
        assert!(b.ground_phrase(&img, "sofa").unwrap().is_empty());
        assert_eq!(
            b.chat_multimodal(&bundle(&img, "anything", ResponseSchema::RiskReportV1))
                .unwrap(),
            "[]"
        );
    }
}
