use serde::Serialize;

use super::ObfuscationTechnique;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Effectiveness {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Detectability {
    Obvious,
    Subtle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VisualHarmony {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Realism {
    Realistic,
    Unnatural,
}

/// One row of the technique attribute table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TechniqueAttributeProfile {
    pub technique: ObfuscationTechnique,
    /// Row name as it appears in the literature table.
    pub table_name: &'static str,
    pub effectiveness_vs_recognition: Effectiveness,
    pub detectability: Detectability,
    pub visual_harmony: VisualHarmony,
    pub narrative_coherence: Level,
    pub realism: Realism,
    pub vulnerability: Level,
}

use Detectability::*;
use Effectiveness as E;
use ObfuscationTechnique as T;
use Realism::*;
use VisualHarmony::*;

const fn row(
    technique: ObfuscationTechnique,
    table_name: &'static str,
    effectiveness_vs_recognition: Effectiveness,
    detectability: Detectability,
    visual_harmony: VisualHarmony,
    narrative_coherence: Level,
    realism: Realism,
    vulnerability: Level,
) -> TechniqueAttributeProfile {
    TechniqueAttributeProfile {
        technique,
        table_name,
        effectiveness_vs_recognition,
        detectability,
        visual_harmony,
        narrative_coherence,
        realism,
        vulnerability,
    }
}

// Avatar replacement is served by the "Cartoon Replacement" row.
const REGISTRY: [TechniqueAttributeProfile; 9] = [
    row(
        T::Masking,
        "Masking/Colorfilling",
        E::High,
        Obvious,
        Weak,
        Level::Low,
        Unnatural,
        Level::Low,
    ),
    row(
        T::Silhouette,
        "Silhouette Masking",
        E::High,
        Obvious,
        Weak,
        Level::Medium,
        Unnatural,
        Level::Medium,
    ),
    row(
        T::Blurring,
        "Blurring",
        E::Low,
        Obvious,
        Weak,
        Level::High,
        Unnatural,
        Level::High,
    ),
    row(
        T::Pixelating,
        "Pixelating",
        E::Low,
        Obvious,
        Weak,
        Level::Medium,
        Unnatural,
        Level::High,
    ),
    row(
        T::BarReplacement,
        "Bar Replacement",
        E::High,
        Obvious,
        Weak,
        Level::Medium,
        Unnatural,
        Level::Low,
    ),
    row(
        T::DotRepresentation,
        "Point Light Replacement",
        E::High,
        Obvious,
        Weak,
        Level::Medium,
        Unnatural,
        Level::Low,
    ),
    row(
        T::AvatarReplacement,
        "Cartoon Replacement",
        E::High,
        Obvious,
        Strong,
        Level::High,
        Unnatural,
        Level::Medium,
    ),
    row(
        T::Removal,
        "Inpainting/Removal",
        E::High,
        Subtle,
        Strong,
        Level::Low,
        Realistic,
        Level::Low,
    ),
    row(
        T::GenerativeReplacement,
        "Generative Content Replacement",
        E::High,
        Subtle,
        Strong,
        Level::High,
        Realistic,
        Level::Low,
    ),
];

/// All nine rows, in table order.
pub fn attribute_registry() -> &'static [TechniqueAttributeProfile] {
    &REGISTRY
}

pub fn technique_attributes(t: ObfuscationTechnique) -> TechniqueAttributeProfile {
    *REGISTRY
        .iter()
        .find(|p| p.technique == t)
        .expect("every technique has a row")
}
