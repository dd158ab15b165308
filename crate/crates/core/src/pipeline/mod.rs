//! The editing session: analysis, localization, edits and history.
//!
//! A [`Session`] is a plain single-owner value; callers that share one across
//! threads wrap it in a lock. The slow steps ([`analyze_image`],
//! [`locate_elements`]) are free functions over snapshots so a lock need not
//! be held while models run.

mod analyze;
mod locate;

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{BackendError, Backends};
use crate::obfuscate::{apply, ObfuscationError, Selection, TechniqueParams};
use crate::prompt::{PreScan, PromptError, UserContext};
use crate::raster::{save_image, ImageBuffer, ImageFormat, RasterError, RegionMask};
use crate::risk::{AnnotatedRiskReport, ObfuscationTechnique, RiskError};

pub use analyze::{analyze_image, identify_risks, Analysis, MAX_MODEL_ATTEMPTS};
pub use locate::{locate_elements, ElementLocation, LocatedInstance};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("no image has been loaded")]
    ImageMissing,
    #[error("no analysis has been run")]
    NoReport,
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error("unknown privacy risk {0}")]
    UnknownRisk(u32),
    #[error("unknown sensitive element {0}")]
    UnknownElement(u32),
    #[error("risk {risk_id} does not list element {element_id}")]
    ElementNotInRisk { risk_id: u32, element_id: u32 },
    #[error("no selection for element {element_id}: {reason}")]
    NoSelection { element_id: u32, reason: String },
    #[error("{stage} reply still invalid after retry: {source}")]
    ParseAfterRetry {
        stage: &'static str,
        #[source]
        source: RiskError,
    },
    #[error("history integrity check failed: {0}")]
    Integrity(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Obfuscation(#[from] ObfuscationError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl PipelineError {
    /// Stable machine tag.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::ImageMissing => "image_missing",
            PipelineError::NoReport => "no_report",
            PipelineError::NothingToUndo => "nothing_to_undo",
            PipelineError::NothingToRedo => "nothing_to_redo",
            PipelineError::UnknownRisk(_) => "unknown_risk",
            PipelineError::UnknownElement(_) => "unknown_element",
            PipelineError::ElementNotInRisk { .. } => "element_not_in_risk",
            PipelineError::NoSelection { .. } => "no_selection",
            PipelineError::ParseAfterRetry { .. } => "model_output_invalid",
            PipelineError::Integrity(_) => "integrity_violation",
            PipelineError::Prompt(PromptError::BoxOutOfBounds { .. }) => "detection_out_of_bounds",
            PipelineError::Prompt(_) => "prompt_error",
            PipelineError::Backend(e) => e.code(),
            PipelineError::Obfuscation(e) => e.code(),
            PipelineError::Raster(RasterError::EmptyMask) => "empty_mask",
            PipelineError::Raster(RasterError::DimensionMismatch { .. }) => "dimension_mismatch",
            PipelineError::Raster(_) => "image_error",
        }
    }
}

/// Hex SHA-256 over the mask's dimensions and bits.
pub fn mask_hash(m: &RegionMask) -> String {
    let mut h = Sha256::new();
    h.update(m.width().to_le_bytes());
    h.update(m.height().to_le_bytes());
    let mut row = Vec::with_capacity(m.width() as usize);
    for y in 0..m.height() {
        row.clear();
        row.extend((0..m.width()).map(|x| m.get(x, y) as u8));
        h.update(&row);
    }
    hex::encode(h.finalize())
}

/// What an edit was aimed at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditTarget {
    Element {
        #[serde(skip_serializing_if = "Option::is_none")]
        risk_id: Option<u32>,
        element_id: u32,
        /// Located instance used; absent for all instances or a custom mask.
        #[serde(skip_serializing_if = "Option::is_none")]
        instance: Option<usize>,
        custom_mask: bool,
    },
    Adhoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    /// 1-based position in the history at the time of the edit.
    pub seq: usize,
    pub technique: ObfuscationTechnique,
    pub target: EditTarget,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation_prompt: Option<String>,
    pub selection_sha256: String,
    pub selection_pixels: usize,
    pub pre_sha256: String,
    pub post_sha256: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone)]
struct Edit {
    record: EditRecord,
    params: TechniqueParams,
    mask: RegionMask,
    pre: ImageBuffer,
    post: ImageBuffer,
}

/// Which region of a located element to edit.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementSelection {
    Instance(usize),
    /// Union of every located instance.
    AllInstances,
    Custom(RegionMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub format: ImageFormat,
    pub image: Vec<u8>,
    pub sidecar: Value,
}

impl Export {
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.sidecar).expect("sidecar serializes")
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    original: Option<ImageBuffer>,
    current: Option<ImageBuffer>,
    context: UserContext,
    prescan: Option<PreScan>,
    report: Option<AnnotatedRiskReport>,
    selections: BTreeMap<u32, ElementLocation>,
    history: Vec<Edit>,
    redo: Vec<Edit>,
    version: u64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

impl Session {
    pub fn new() -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string())
    }

    pub fn with_id(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            original: None,
            current: None,
            context: UserContext::default(),
            prescan: None,
            report: None,
            selections: BTreeMap::new(),
            history: Vec::new(),
            redo: Vec::new(),
            version: 0,
        }
    }

    pub fn from_image(img: ImageBuffer) -> Self {
        let mut s = Self::new();
        s.load_image(img);
        s
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Bumped by every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn redo_len(&self) -> usize {
        self.redo.len()
    }

    pub fn original(&self) -> Option<&ImageBuffer> {
        self.original.as_ref()
    }

    pub fn current(&self) -> Result<&ImageBuffer, PipelineError> {
        self.current.as_ref().ok_or(PipelineError::ImageMissing)
    }

    pub fn context(&self) -> &UserContext {
        &self.context
    }

    pub fn prescan(&self) -> Option<&PreScan> {
        self.prescan.as_ref()
    }

    pub fn report(&self) -> Option<&AnnotatedRiskReport> {
        self.report.as_ref()
    }

    pub fn selections(&self) -> &BTreeMap<u32, ElementLocation> {
        &self.selections
    }

    pub fn edits(&self) -> impl Iterator<Item = &EditRecord> {
        self.history.iter().map(|e| &e.record)
    }

    fn touch(&mut self) {
        self.version += 1;
    }

    /// Replaces the image and discards everything derived from the old one,
    /// including the concern mask. Intent and concern text are kept.
    pub fn load_image(&mut self, img: ImageBuffer) {
        self.original = Some(img.clone());
        self.current = Some(img);
        self.context.concern_mask = None;
        self.prescan = None;
        self.report = None;
        self.selections.clear();
        self.history.clear();
        self.redo.clear();
        self.touch();
    }

    pub fn set_text_context(&mut self, intent: Option<String>, concern: Option<String>) {
        self.context.sharing_intent = intent;
        self.context.privacy_concern = concern;
        self.touch();
    }

    /// `None` clears the concern region.
    pub fn set_concern_mask(&mut self, mask: Option<RegionMask>) -> Result<(), PipelineError> {
        if let Some(m) = &mask {
            let img = self.current()?;
            m.ensure_same_dims(img.width(), img.height())?;
        }
        self.context.concern_mask = mask;
        self.touch();
        Ok(())
    }

    /// Snapshot of the inputs for [`analyze_image`]: the current image, so
    /// re-analysis sees edits already made.
    pub fn analysis_input(&self) -> Result<(ImageBuffer, UserContext), PipelineError> {
        Ok((self.current()?.clone(), self.context.clone()))
    }

    /// Stores an analysis. Earlier selections are dropped since element ids
    /// may now mean something else.
    pub fn install_analysis(&mut self, a: Analysis) {
        self.prescan = Some(a.prescan);
        self.report = Some(a.report);
        self.selections.clear();
        self.touch();
    }

    pub fn analyze(&mut self, backends: &Backends) -> Result<&AnnotatedRiskReport, PipelineError> {
        let (img, ctx) = self.analysis_input()?;
        let a = analyze_image(&img, &ctx, backends)?;
        self.install_analysis(a);
        Ok(self.report.as_ref().expect("just installed"))
    }

    pub fn locate_input(&self) -> Result<(ImageBuffer, AnnotatedRiskReport), PipelineError> {
        let report = self.report.clone().ok_or(PipelineError::NoReport)?;
        Ok((self.current()?.clone(), report))
    }

    pub fn install_locations(&mut self, found: BTreeMap<u32, ElementLocation>) {
        self.selections = found;
        self.touch();
    }

    pub fn locate(&mut self, backends: &Backends) -> Result<&BTreeMap<u32, ElementLocation>, PipelineError> {
        let (img, report) = self.locate_input()?;
        let found = locate_elements(&img, &report.elements, backends)?;
        self.install_locations(found);
        Ok(&self.selections)
    }

    fn element_mask(&self, element_id: u32, choice: &ElementSelection) -> Result<RegionMask, PipelineError> {
        let img = self.current()?;
        let (w, h) = img.dimensions();
        if let ElementSelection::Custom(m) = choice {
            m.ensure_same_dims(w, h)?;
            return Ok(m.clone());
        }
        let no_sel = |reason: &str| PipelineError::NoSelection {
            element_id,
            reason: reason.to_string(),
        };
        let loc = self
            .selections
            .get(&element_id)
            .ok_or_else(|| no_sel("element has not been located"))?;
        let chosen: Vec<&LocatedInstance> = match choice {
            ElementSelection::Instance(i) => {
                vec![loc
                    .instances
                    .get(*i)
                    .ok_or_else(|| no_sel(&format!("no instance {i}")))?]
            }
            _ => loc.instances.iter().collect(),
        };
        if chosen.is_empty() {
            return Err(no_sel("could not locate"));
        }
        let mut mask = RegionMask::new(w, h)?;
        for inst in chosen {
            mask = mask.union(&Selection::Contour(inst.contour.clone()).to_mask(w, h)?)?;
        }
        Ok(mask)
    }

    /// Applies a technique to a located element (or a mask replacing its
    /// located region).
    pub fn apply_recommendation(
        &mut self,
        risk_id: Option<u32>,
        element_id: u32,
        params: TechniqueParams,
        choice: ElementSelection,
        backends: &Backends,
    ) -> Result<EditRecord, PipelineError> {
        let report = self.report.as_ref().ok_or(PipelineError::NoReport)?;
        if !report.elements.contains_key(&element_id) {
            return Err(PipelineError::UnknownElement(element_id));
        }
        if let Some(rid) = risk_id {
            let risk = report.risk(rid).ok_or(PipelineError::UnknownRisk(rid))?;
            if !risk.risk.elements.iter().any(|e| e.id == element_id) {
                return Err(PipelineError::ElementNotInRisk {
                    risk_id: rid,
                    element_id,
                });
            }
        }
        let mask = self.element_mask(element_id, &choice)?;
        let target = EditTarget::Element {
            risk_id,
            element_id,
            instance: match choice {
                ElementSelection::Instance(i) => Some(i),
                _ => None,
            },
            custom_mask: matches!(choice, ElementSelection::Custom(_)),
        };
        self.commit(target, params, mask, backends)
    }

    /// Applies a technique to a hand-drawn mask, outside any report.
    pub fn apply_adhoc(
        &mut self,
        params: TechniqueParams,
        mask: RegionMask,
        backends: &Backends,
    ) -> Result<EditRecord, PipelineError> {
        self.commit(EditTarget::Adhoc, params, mask, backends)
    }

    fn commit(
        &mut self,
        target: EditTarget,
        params: TechniqueParams,
        mask: RegionMask,
        backends: &Backends,
    ) -> Result<EditRecord, PipelineError> {
        let pre = self.current()?.clone();
        if mask.is_empty() {
            return Err(RasterError::EmptyMask.into());
        }
        let technique = params.technique();
        let post = apply(technique, &pre, &Selection::Mask(mask.clone()), &params, backends)?;
        let record = EditRecord {
            seq: self.history.len() + 1,
            technique,
            target,
            params: params.to_json(),
            generation_prompt: params.generation_prompt().map(str::to_string),
            selection_sha256: mask_hash(&mask),
            selection_pixels: mask.count(),
            pre_sha256: pre.content_hash(),
            post_sha256: post.content_hash(),
            timestamp_ms: now_ms(),
        };
        self.current = Some(post.clone());
        self.history.push(Edit {
            record: record.clone(),
            params,
            mask,
            pre,
            post,
        });
        self.redo.clear();
        self.touch();
        Ok(record)
    }

    pub fn undo(&mut self) -> Result<&EditRecord, PipelineError> {
        let edit = self.history.pop().ok_or(PipelineError::NothingToUndo)?;
        if edit.pre.content_hash() != edit.record.pre_sha256 {
            self.history.push(edit);
            return Err(PipelineError::Integrity(
                "stored pre-image does not match its hash".into(),
            ));
        }
        self.current = Some(edit.pre.clone());
        self.redo.push(edit);
        self.touch();
        Ok(&self.redo.last().expect("just pushed").record)
    }

    pub fn redo(&mut self) -> Result<&EditRecord, PipelineError> {
        let edit = self.redo.pop().ok_or(PipelineError::NothingToRedo)?;
        let cur = self.current()?.content_hash();
        if cur != edit.record.pre_sha256 || edit.post.content_hash() != edit.record.post_sha256 {
            self.redo.push(edit);
            return Err(PipelineError::Integrity(
                "redo does not start from the recorded image".into(),
            ));
        }
        self.current = Some(edit.post.clone());
        self.history.push(edit);
        self.touch();
        Ok(&self.history.last().expect("just pushed").record)
    }

    /// Rebuilds the current image from the original: classical edits are
    /// recomputed, generative ones taken from their stored results.
    pub fn replay(&self) -> Result<ImageBuffer, PipelineError> {
        let mut img = self.original.clone().ok_or(PipelineError::ImageMissing)?;
        for (i, e) in self.history.iter().enumerate() {
            if img.content_hash() != e.record.pre_sha256 {
                return Err(PipelineError::Integrity(format!(
                    "edit {} does not start where edit {i} ended",
                    i + 1
                )));
            }
            img = if e.record.technique.uses_generator() {
                e.post.clone()
            } else {
                apply(
                    e.record.technique,
                    &img,
                    &Selection::Mask(e.mask.clone()),
                    &e.params,
                    &Backends::default(),
                )?
            };
            if img.content_hash() != e.record.post_sha256 {
                return Err(PipelineError::Integrity(format!(
                    "edit {} replays to a different image",
                    i + 1
                )));
            }
        }
        Ok(img)
    }

    /// The sidecar document: `{report, edits, tool_version}`.
    pub fn sidecar(&self) -> Value {
        let report = self
            .report
            .as_ref()
            .map(|r| serde_json::from_str::<Value>(&r.to_canonical_json()).expect("canonical JSON parses"))
            .unwrap_or(Value::Null);
        json!({
            "report": report,
            "edits": self.edits().collect::<Vec<_>>(),
            "tool_version": TOOL_VERSION,
        })
    }

    pub fn export(&self, format: ImageFormat) -> Result<Export, PipelineError> {
        Ok(Export {
            format,
            image: save_image(self.current()?, format)?,
            sidecar: self.sidecar(),
        })
    }
}
