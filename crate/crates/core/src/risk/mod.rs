//! Risk and recommendation data model, the tolerant JSON parsers for model
//! output, and the technique attribute registry.

mod attributes;
mod category;
pub mod fixture;
mod json;
mod merge;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use attributes::{
    attribute_registry, technique_attributes, Detectability, Effectiveness, Level, Realism, TechniqueAttributeProfile,
    VisualHarmony,
};
pub use category::{classify_category, CATEGORY_TABLE_VERSION};
pub use json::extract_json;
pub use merge::merge_recommendations;
pub use parse::{parse_annotated_report, parse_recommendations, parse_risk_report};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RiskError {
    #[error("model output is not JSON: {0}")]
    NotJson(String),
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("element id {id} is used for both {first:?} and {second:?}")]
    DuplicateElementConflict { id: u32, first: String, second: String },
    #[error("unknown obfuscation technique {0:?}")]
    UnknownTechnique(String),
    #[error("recommendations reference unknown privacy risk {0}")]
    UnknownRiskId(u32),
    #[error("recommendation references unknown sensitive element {element_id} (risk {risk_id})")]
    UnknownElementId { risk_id: u32, element_id: u32 },
    #[error("privacy risks without any recommendation: {0:?}")]
    CoverageGap(Vec<u32>),
}

impl RiskError {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            RiskError::NotJson(_) => "not_json",
            RiskError::SchemaViolation { .. } => "schema_violation",
            RiskError::DuplicateElementConflict { .. } => "duplicate_element_conflict",
            RiskError::UnknownTechnique(_) => "unknown_technique",
            RiskError::UnknownRiskId(_) => "unknown_risk_id",
            RiskError::UnknownElementId { .. } => "unknown_element_id",
            RiskError::CoverageGap(_) => "coverage_gap",
        }
    }

    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        RiskError::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::High => "High",
            Severity::Medium => "Medium",
            Severity::Low => "Low",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(Severity::High),
            "medium" => Ok(Severity::Medium),
            "low" => Ok(Severity::Low),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

impl Serialize for Severity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Severity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RiskCategory {
    SelfDisclosure,
    IdentityExposure,
    ConfidentialInformationLeakage,
    LocationExposure,
    Bystander,
    Other(String),
}

impl RiskCategory {
    pub fn tag(&self) -> &'static str {
        match self {
            RiskCategory::SelfDisclosure => "SelfDisclosure",
            RiskCategory::IdentityExposure => "IdentityExposure",
            RiskCategory::ConfidentialInformationLeakage => "ConfidentialInformationLeakage",
            RiskCategory::LocationExposure => "LocationExposure",
            RiskCategory::Bystander => "Bystander",
            RiskCategory::Other(_) => "Other",
        }
    }
}

impl Serialize for RiskCategory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

/// One occurrence of a sensitive element inside a privacy risk. The cause is
/// specific to the risk; text and id are shared across risks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitiveElement {
    pub id: u32,
    pub element: String,
    pub risk_cause: String,
    pub marked_by_user: bool,
}

/// Deduplicated element registry entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementEntry {
    pub id: u32,
    pub element: String,
    pub marked_by_user: bool,
    /// Ids of the risks listing this element, in report order.
    pub risk_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyRisk {
    pub privacy_risk_id: u32,
    /// Stored verbatim even when longer than the requested five words.
    pub label: String,
    pub category: RiskCategory,
    pub severity: Severity,
    pub threat_actors: Vec<String>,
    pub elements: Vec<SensitiveElement>,
}

impl PrivacyRisk {
    pub fn has_user_marked_element(&self) -> bool {
        self.elements.iter().any(|e| e.marked_by_user)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RiskReport {
    pub risks: Vec<PrivacyRisk>,
    pub elements: BTreeMap<u32, ElementEntry>,
}

impl RiskReport {
    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    pub fn risk(&self, id: u32) -> Option<&PrivacyRisk> {
        self.risks.iter().find(|r| r.privacy_risk_id == id)
    }

    /// Raises every risk that lists a user-marked element to High. Returns
    /// the ids of the risks that changed.
    pub fn escalate_user_marked(&mut self) -> Vec<u32> {
        let mut changed = Vec::new();
        for risk in &mut self.risks {
            if risk.has_user_marked_element() && risk.severity != Severity::High {
                risk.severity = Severity::High;
                changed.push(risk.privacy_risk_id);
            }
        }
        changed
    }

    pub(crate) fn wire(&self) -> Vec<parse::RiskWire> {
        self.risks.iter().map(parse::RiskWire::from_risk).collect()
    }

    /// Canonical identification-format JSON (pretty, stable key order).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.wire()).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObfuscationTechnique {
    GenerativeReplacement,
    Removal,
    DotRepresentation,
    AvatarReplacement,
    BarReplacement,
    Silhouette,
    Masking,
    Pixelating,
    Blurring,
}

impl ObfuscationTechnique {
    pub const ALL: [ObfuscationTechnique; 9] = [
        ObfuscationTechnique::GenerativeReplacement,
        ObfuscationTechnique::Removal,
        ObfuscationTechnique::DotRepresentation,
        ObfuscationTechnique::AvatarReplacement,
        ObfuscationTechnique::BarReplacement,
        ObfuscationTechnique::Silhouette,
        ObfuscationTechnique::Masking,
        ObfuscationTechnique::Pixelating,
        ObfuscationTechnique::Blurring,
    ];

    /// The name used in the recommendation output format.
    pub fn display_name(self) -> &'static str {
        match self {
            ObfuscationTechnique::GenerativeReplacement => "Generative Replacement",
            ObfuscationTechnique::Removal => "Removal",
            ObfuscationTechnique::DotRepresentation => "Dot Representation",
            ObfuscationTechnique::AvatarReplacement => "Avatar Replacement",
            ObfuscationTechnique::BarReplacement => "Bar Replacement",
            ObfuscationTechnique::Silhouette => "Silhouette",
            ObfuscationTechnique::Masking => "Masking",
            ObfuscationTechnique::Pixelating => "Pixelating",
            ObfuscationTechnique::Blurring => "Blurring",
        }
    }

    /// Short CLI name.
    pub fn slug(self) -> &'static str {
        match self {
            ObfuscationTechnique::GenerativeReplacement => "generative",
            ObfuscationTechnique::Removal => "removal",
            ObfuscationTechnique::DotRepresentation => "dots",
            ObfuscationTechnique::AvatarReplacement => "avatar",
            ObfuscationTechnique::BarReplacement => "bar",
            ObfuscationTechnique::Silhouette => "silhouette",
            ObfuscationTechnique::Masking => "mask",
            ObfuscationTechnique::Pixelating => "pixelate",
            ObfuscationTechnique::Blurring => "blur",
        }
    }

    /// Techniques that need the image generator.
    pub fn uses_generator(self) -> bool {
        matches!(
            self,
            ObfuscationTechnique::GenerativeReplacement
                | ObfuscationTechnique::Removal
                | ObfuscationTechnique::DotRepresentation
                | ObfuscationTechnique::AvatarReplacement
                | ObfuscationTechnique::BarReplacement
        )
    }

    /// Techniques whose recommendation may carry a generation prompt.
    pub fn carries_prompt(self) -> bool {
        matches!(
            self,
            ObfuscationTechnique::GenerativeReplacement | ObfuscationTechnique::AvatarReplacement
        )
    }
}

impl fmt::Display for ObfuscationTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ObfuscationTechnique {
    type Err = RiskError;

    /// Case-insensitive; spaces, dashes, underscores and slashes are ignored.
    /// Accepts the output-format names, the attribute-table names and the CLI
    /// slugs.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ObfuscationTechnique::*;
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(|c| c.to_lowercase())
            .collect();
        let t = match key.as_str() {
            "generativereplacement" | "generativecontentreplacement" | "gcr" | "generative" => GenerativeReplacement,
            "removal" | "inpainting" | "inpaintingremoval" | "remove" => Removal,
            "dotrepresentation" | "pointlightreplacement" | "pointlight" | "dots" => DotRepresentation,
            "avatarreplacement" | "avatar" => AvatarReplacement,
            "barreplacement" | "bar" => BarReplacement,
            "silhouette" | "silhouettemasking" => Silhouette,
            "masking" | "maskingcolorfilling" | "mask" => Masking,
            "pixelating" | "pixelation" | "pixelate" => Pixelating,
            "blurring" | "blur" => Blurring,
            _ => return Err(RiskError::UnknownTechnique(s.to_string())),
        };
        Ok(t)
    }
}

impl Serialize for ObfuscationTechnique {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.display_name())
    }
}

impl<'de> Deserialize<'de> for ObfuscationTechnique {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub element_id: u32,
    pub technique: ObfuscationTechnique,
    pub description: String,
    /// Empty unless the technique carries a prompt.
    pub generation_prompt: String,
    pub advantages: Vec<String>,
    pub disadvantages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskRecommendations {
    pub privacy_risk_id: u32,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecommendationSet {
    pub entries: Vec<RiskRecommendations>,
    pub warnings: Vec<String>,
}

impl RecommendationSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical recommendation-format JSON.
    pub fn to_canonical_json(&self) -> String {
        let wire: Vec<_> = self
            .entries
            .iter()
            .map(|e| parse::RiskRecsWire {
                privacy_risk_id: e.privacy_risk_id,
                recommendations: e.recommendations.iter().map(parse::RecWire::from).collect(),
            })
            .collect();
        serde_json::to_string_pretty(&wire).expect("recommendations serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRisk {
    pub risk: PrivacyRisk,
    pub recommendations: Vec<Recommendation>,
}

/// A risk report joined with its recommendations. Every risk has at least
/// one recommendation and at most two per element.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotatedRiskReport {
    pub risks: Vec<AnnotatedRisk>,
    pub elements: BTreeMap<u32, ElementEntry>,
    pub warnings: Vec<String>,
}

impl AnnotatedRiskReport {
    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    pub fn risk(&self, id: u32) -> Option<&AnnotatedRisk> {
        self.risks.iter().find(|r| r.risk.privacy_risk_id == id)
    }

    /// The underlying identification report (recommendations dropped).
    pub fn report(&self) -> RiskReport {
        RiskReport {
            risks: self.risks.iter().map(|r| r.risk.clone()).collect(),
            elements: self.elements.clone(),
        }
    }

    /// Canonical JSON: the identification format with a derived `category`
    /// and the `recommendations` array attached to every risk object. Both
    /// output-format parsers accept it.
    pub fn to_canonical_json(&self) -> String {
        let wire: Vec<_> = self
            .risks
            .iter()
            .map(|r| parse::AnnotatedWire {
                base: parse::RiskWire::from_risk(&r.risk),
                category: r.risk.category.clone(),
                recommendations: r.recommendations.iter().map(parse::RecWire::from).collect(),
            })
            .collect();
        serde_json::to_string_pretty(&wire).expect("annotated report serializes")
    }
}
