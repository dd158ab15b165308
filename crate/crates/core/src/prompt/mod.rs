//! Prompt construction for the two model calls: risk identification and
//! obfuscation recommendation.
//!
//! The instruction texts live in `assets/prompts/` as verbatim, versioned
//! files. User context and intermediate results are rendered from a small
//! companion template and inserted as a labelled block right after the
//! materials section of each prompt.

mod prescan;
pub mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use prescan::{build_prescan, label_origin, PreScan, PRESCAN_BOX_COLOR, PRESCAN_BOX_THICKNESS};
use template::Template;

use crate::raster::{render_concern_overlay, BoundingBox, ImageBuffer, RasterError, RegionMask};
use crate::risk::RiskReport;

pub const TEMPLATE_VERSION: u32 = 1;

pub const IDENTIFICATION_TEMPLATE: &str = include_str!("../../assets/prompts/identification_v1.txt");
pub const RECOMMENDATION_TEMPLATE: &str = include_str!("../../assets/prompts/recommendation_v1.txt");
const IDENTIFICATION_CONTEXT: &str = include_str!("../../assets/prompts/identification_context_v1.txt");
const RECOMMENDATION_CONTEXT: &str = include_str!("../../assets/prompts/recommendation_context_v1.txt");

/// The context block goes in front of the first line starting with this.
const IDENTIFICATION_ANCHOR: &str = "[TASKS]";
const RECOMMENDATION_ANCHOR: &str = "[Tasks]:";

/// Stands in for any context the user did not give.
pub const NOT_PROVIDED: &str = "not provided";
const CONCERN_REGION_ATTACHED: &str =
    "provided (attached image; the user's concern regions are outlined with a green border)";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("detection {label:?} box {bbox:?} lies outside the image")]
    BoxOutOfBounds { label: String, bbox: BoundingBox },
    #[error("cannot build a recommendation prompt for a report without risks")]
    EmptyReport,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("template error: {0}")]
    Template(String),
}

/// What the user told us about the image. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserContext {
    pub sharing_intent: Option<String>,
    pub privacy_concern: Option<String>,
    pub concern_mask: Option<RegionMask>,
}

impl UserContext {
    fn text_or_sentinel(v: &Option<String>) -> String {
        match v.as_deref().map(str::trim) {
            Some(s) if !s.is_empty() => s.to_string(),
            _ => NOT_PROVIDED.to_string(),
        }
    }

    /// The concern mask, when it selects anything.
    pub fn active_concern_mask(&self) -> Option<&RegionMask> {
        self.concern_mask.as_ref().filter(|m| !m.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageRole {
    Original,
    PreScanAnnotated,
    ConcernOverlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResponseSchema {
    RiskReportV1,
    RecommendationSetV1,
}

/// Everything one multimodal call needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub text: String,
    /// Fixed order: original, pre-scan annotated, concern overlay.
    pub images: Vec<(ImageRole, ImageBuffer)>,
    pub expected_response: ResponseSchema,
}

impl PromptBundle {
    /// Hex SHA-256 over the schema, text and every attached image.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}\n", self.expected_response));
        h.update(self.text.as_bytes());
        for (role, img) in &self.images {
            h.update(format!("\n{role:?}:"));
            h.update(img.content_hash());
        }
        hex::encode(h.finalize())
    }

    /// Plain-text rendering for golden files: a header naming the schema and
    /// each image (role, size, content hash), a blank line, then the text.
    pub fn golden_text(&self) -> String {
        let mut out = format!("schema: {:?}\n", self.expected_response);
        for (role, img) in &self.images {
            out.push_str(&format!(
                "image: {:?} {}x{} {}\n",
                role,
                img.width(),
                img.height(),
                img.content_hash()
            ));
        }
        out.push('\n');
        out.push_str(&self.text);
        out
    }
}

fn insert_before_anchor(base: &str, anchor: &str, block: &str) -> Result<String, PromptError> {
    let at = base
        .match_indices(anchor)
        .map(|(i, _)| i)
        .find(|&i| i == 0 || base.as_bytes()[i - 1] == b'\n')
        .ok_or_else(|| PromptError::Template(format!("anchor {anchor:?} not found")))?;
    let mut out = String::with_capacity(base.len() + block.len());
    out.push_str(&base[..at]);
    out.push_str(block);
    out.push_str(&base[at..]);
    Ok(out)
}

fn context_values(ctx: &UserContext) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    v.insert("sharing_intent", UserContext::text_or_sentinel(&ctx.sharing_intent));
    v.insert("privacy_concern", UserContext::text_or_sentinel(&ctx.privacy_concern));
    v.insert(
        "concern_region",
        if ctx.active_concern_mask().is_some() {
            CONCERN_REGION_ATTACHED.to_string()
        } else {
            NOT_PROVIDED.to_string()
        },
    );
    v
}

fn concern_overlay(ctx: &UserContext, img: &ImageBuffer) -> Result<Option<ImageBuffer>, PromptError> {
    match ctx.active_concern_mask() {
        Some(m) => Ok(Some(render_concern_overlay(img, m)?)),
        None => Ok(None),
    }
}

pub fn build_identification_prompt(
    ctx: &UserContext,
    scan: &PreScan,
    img: &ImageBuffer,
) -> Result<PromptBundle, PromptError> {
    let mut values = context_values(ctx);
    values.insert("object_dictionary", scan.object_dictionary.clone());
    let block = Template::parse(IDENTIFICATION_CONTEXT)?.render(&values)?;
    let text = insert_before_anchor(IDENTIFICATION_TEMPLATE, IDENTIFICATION_ANCHOR, &block)?;

    let mut images = vec![
        (ImageRole::Original, img.clone()),
        (ImageRole::PreScanAnnotated, scan.annotated_image.clone()),
    ];
    if let Some(overlay) = concern_overlay(ctx, img)? {
        images.push((ImageRole::ConcernOverlay, overlay));
    }
    Ok(PromptBundle {
        text,
        images,
        expected_response: ResponseSchema::RiskReportV1,
    })
}

pub fn build_recommendation_prompt(
    ctx: &UserContext,
    report: &RiskReport,
    img: &ImageBuffer,
) -> Result<PromptBundle, PromptError> {
    if report.is_empty() {
        return Err(PromptError::EmptyReport);
    }
    let mut values = context_values(ctx);
    values.insert("identification_result", report.to_canonical_json());
    let block = Template::parse(RECOMMENDATION_CONTEXT)?.render(&values)?;
    let text = insert_before_anchor(RECOMMENDATION_TEMPLATE, RECOMMENDATION_ANCHOR, &block)?;

    let mut images = vec![(ImageRole::Original, img.clone())];
    if let Some(overlay) = concern_overlay(ctx, img)? {
        images.push((ImageRole::ConcernOverlay, overlay));
    }
    Ok(PromptBundle {
        text,
        images,
        expected_response: ResponseSchema::RecommendationSetV1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::parse_risk_report;

    fn image() -> ImageBuffer {
        ImageBuffer::filled(32, 24, [90, 100, 110, 255]).unwrap()
    }

    fn scan(img: &ImageBuffer) -> PreScan {
        build_prescan(img, vec![]).unwrap()
    }

    #[test]
    fn transcriptions_are_pinned() {
        let digest = |s: &str| hex::encode(Sha256::digest(s.as_bytes()));
        assert_eq!(
            digest(IDENTIFICATION_TEMPLATE),
            "6def109cf6de0795d3c1b51ef0aea54a435dd93c7e39192bfadcc51700e5aabc"
        );
        assert_eq!(
            digest(RECOMMENDATION_TEMPLATE),
            "d2a6245f6577cb66ac655f3610224c2536f9b23926c1b4fced6718302cd17a53"
        );
        assert!(!IDENTIFICATION_TEMPLATE.contains("{{"));
        assert!(!RECOMMENDATION_TEMPLATE.contains("{{"));
    }

    #[test]
    fn empty_context_uses_sentinels_and_two_images() {
        let img = image();
        let b = build_identification_prompt(&UserContext::default(), &scan(&img), &img).unwrap();
        assert!(b.text.contains("USER SHARING INTENT: not provided"));
        assert!(b.text.contains("USER PRIVACY CONCERN: not provided"));
        assert!(b.text.contains("USER CONCERN REGION: not provided"));
        assert_eq!(b.images.len(), 2);
        assert_eq!(b.images[0].0, ImageRole::Original);
        assert_eq!(b.images[1].0, ImageRole::PreScanAnnotated);
        assert!(!b.text.contains("{{"));
        // The block sits between the materials and the task list.
        let block = b.text.find("USER SHARING INTENT").unwrap();
        assert!(b.text.find("[MATERIALS]").unwrap() < block);
        assert!(block < b.text.find("[TASKS]").unwrap());
    }

    #[test]
    fn concern_mask_adds_overlay() {
        let img = image();
        let mut m = RegionMask::new(32, 24).unwrap();
        m.set(4, 4, true);
        let ctx = UserContext {
            concern_mask: Some(m),
            ..Default::default()
        };
        let b = build_identification_prompt(&ctx, &scan(&img), &img).unwrap();
        assert_eq!(b.images.len(), 3);
        assert_eq!(b.images[2].0, ImageRole::ConcernOverlay);
        assert!(b
            .text
            .contains("the elements in the green border should be considered as sensitive elements"));

        // An all-false mask is no concern region.
        let ctx = UserContext {
            concern_mask: Some(RegionMask::new(32, 24).unwrap()),
            ..Default::default()
        };
        assert_eq!(
            build_identification_prompt(&ctx, &scan(&img), &img)
                .unwrap()
                .images
                .len(),
            2
        );
    }

    #[test]
    fn identical_inputs_identical_text() {
        let img = image();
        let ctx = UserContext {
            sharing_intent: Some("Share with family".into()),
            ..Default::default()
        };
        let a = build_identification_prompt(&ctx, &scan(&img), &img).unwrap();
        let b = build_identification_prompt(&ctx, &scan(&img), &img).unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn prompt_construction_leaves_inputs_alone() {
        let img = image();
        let before = img.clone();
        let s = scan(&img);
        let _ = build_identification_prompt(&UserContext::default(), &s, &img).unwrap();
        assert_eq!(img, before);
    }

    #[test]
    fn recommendation_prompt_embeds_report() {
        let img = image();
        let report = parse_risk_report(
            r#"[{"privacy_risk_id": 1, "privacyRisk": "Reveals where you are", "severity": "Medium",
                 "threatActors": ["Public Users"],
                 "sensitiveElements": [{"id": 1, "element": "street sign", "riskCause": "names the street", "markedByUser": false}]}]"#,
        )
        .unwrap();
        let b = build_recommendation_prompt(&UserContext::default(), &report, &img).unwrap();
        assert!(b.text.contains(&report.to_canonical_json()));
        assert_eq!(b.expected_response, ResponseSchema::RecommendationSetV1);
        assert!(b.text.find("IDENTIFICATION RESULT").unwrap() < b.text.find("[Tasks]:").unwrap());
        let again = build_recommendation_prompt(&UserContext::default(), &report, &img).unwrap();
        assert_eq!(b.text, again.text);
    }

    #[test]
    fn recommendation_prompt_needs_risks() {
        let img = image();
        assert_eq!(
            build_recommendation_prompt(&UserContext::default(), &RiskReport::default(), &img).unwrap_err(),
            PromptError::EmptyReport
        );
    }
}
