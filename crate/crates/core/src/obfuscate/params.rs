use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Deserializer};
use serde_json::{json, Value};

use super::ObfuscationError;
use crate::raster::{load_image, ImageBuffer, Rgba};
use crate::risk::ObfuscationTechnique;

pub const DEFAULT_SIGMA: f64 = 8.0;
pub const DEFAULT_BLOCK: u32 = 12;
pub const DEFAULT_MASK_COLOR: Rgba = [0, 0, 0, 255];
pub const DEFAULT_SILHOUETTE_COLOR: Rgba = [40, 40, 40, 255];
pub const DEFAULT_BAR_COLOR: Rgba = [0, 0, 0, 255];
pub const DEFAULT_BAR_HEIGHT_FRACTION: f64 = 0.3;
pub const DEFAULT_DOT_RADIUS: u32 = 4;
pub const DOT_COLOR: Rgba = [255, 255, 255, 255];
pub const REMOVAL_PROMPT: &str = "background continuation";
pub const DEFAULT_AVATAR_PROMPT: &str = "neutral cartoon avatar face, matching lighting";
pub const MAX_SIGMA: f64 = 256.0;
pub const MAX_DOT_RADIUS: u32 = 256;

/// Parses `#rrggbb`, `#rrggbbaa` or `r,g,b[,a]`.
pub fn parse_color(s: &str) -> Result<Rgba, String> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix('#') {
        let bytes = hex::decode(hex).map_err(|_| format!("bad hex colour {s:?}"))?;
        return match bytes.as_slice() {
            [r, g, b] => Ok([*r, *g, *b, 255]),
            [r, g, b, a] => Ok([*r, *g, *b, *a]),
            _ => Err(format!("hex colour {s:?} needs 6 or 8 digits")),
        };
    }
    let parts: Result<Vec<u8>, _> = s.split(',').map(|p| p.trim().parse::<u8>()).collect();
    match parts.map_err(|_| format!("bad colour {s:?}"))?.as_slice() {
        [r, g, b] => Ok([*r, *g, *b, 255]),
        [r, g, b, a] => Ok([*r, *g, *b, *a]),
        _ => Err(format!("colour {s:?} needs 3 or 4 components")),
    }
}

fn de_color<'de, D: Deserializer<'de>>(d: D) -> Result<Rgba, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Rgb([u8; 3]),
        Rgba([u8; 4]),
    }
    match Raw::deserialize(d)? {
        Raw::Text(s) => parse_color(&s).map_err(serde::de::Error::custom),
        Raw::Rgb([r, g, b]) => Ok([r, g, b, 255]),
        Raw::Rgba(c) => Ok(c),
    }
}

/// Decodes a base64 PNG or JPEG.
pub fn decode_reference(b64: &str) -> Result<ImageBuffer, String> {
    let bytes = B64
        .decode(b64.trim())
        .map_err(|e| format!("reference is not base64: {e}"))?;
    load_image(&bytes, None).map_err(|e| format!("reference does not decode: {e}"))
}

fn de_reference<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ImageBuffer>, D::Error> {
    match Option::<String>::deserialize(d)? {
        None => Ok(None),
        Some(s) => decode_reference(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlurParams {
    pub sigma: f64,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self { sigma: DEFAULT_SIGMA }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PixelateParams {
    pub block: u32,
}

impl Default for PixelateParams {
    fn default() -> Self {
        Self { block: DEFAULT_BLOCK }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillParams {
    #[serde(deserialize_with = "de_color")]
    pub color: Rgba,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarParams {
    #[serde(deserialize_with = "de_color")]
    pub color: Rgba,
    /// Bar height as a fraction of the selection's bounding-box height.
    pub height_fraction: f64,
}

impl Default for BarParams {
    fn default() -> Self {
        Self {
            color: DEFAULT_BAR_COLOR,
            height_fraction: DEFAULT_BAR_HEIGHT_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DotParams {
    pub dot_radius: u32,
    pub draw_skeleton_lines: bool,
}

impl Default for DotParams {
    fn default() -> Self {
        Self {
            dot_radius: DEFAULT_DOT_RADIUS,
            draw_skeleton_lines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvatarParams {
    pub style_prompt: String,
    #[serde(deserialize_with = "de_reference")]
    pub reference: Option<ImageBuffer>,
}

impl Default for AvatarParams {
    fn default() -> Self {
        Self {
            style_prompt: DEFAULT_AVATAR_PROMPT.to_string(),
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerativeParams {
    pub prompt: String,
    #[serde(deserialize_with = "de_reference")]
    pub reference: Option<ImageBuffer>,
}

/// Per-technique settings.
#[derive(Debug, Clone, PartialEq)]
pub enum TechniqueParams {
    Blurring(BlurParams),
    Pixelating(PixelateParams),
    Masking(FillParams),
    Silhouette(FillParams),
    Bar(BarParams),
    DotRepresentation(DotParams),
    Removal,
    Avatar(AvatarParams),
    GenerativeReplacement(GenerativeParams),
}

impl TechniqueParams {
    /// Defaults for `t`. Generative replacement starts with an empty prompt,
    /// which [`validate`](Self::validate) rejects.
    pub fn default_for(t: ObfuscationTechnique) -> Self {
        use ObfuscationTechnique as T;
        match t {
            T::Blurring => Self::Blurring(BlurParams::default()),
            T::Pixelating => Self::Pixelating(PixelateParams::default()),
            T::Masking => Self::Masking(FillParams {
                color: DEFAULT_MASK_COLOR,
            }),
            T::Silhouette => Self::Silhouette(FillParams {
                color: DEFAULT_SILHOUETTE_COLOR,
            }),
            T::BarReplacement => Self::Bar(BarParams::default()),
            T::DotRepresentation => Self::DotRepresentation(DotParams::default()),
            T::Removal => Self::Removal,
            T::AvatarReplacement => Self::Avatar(AvatarParams::default()),
            T::GenerativeReplacement => Self::GenerativeReplacement(GenerativeParams::default()),
        }
    }

    pub fn technique(&self) -> ObfuscationTechnique {
        use ObfuscationTechnique as T;
        match self {
            Self::Blurring(_) => T::Blurring,
            Self::Pixelating(_) => T::Pixelating,
            Self::Masking(_) => T::Masking,
            Self::Silhouette(_) => T::Silhouette,
            Self::Bar(_) => T::BarReplacement,
            Self::DotRepresentation(_) => T::DotRepresentation,
            Self::Removal => T::Removal,
            Self::Avatar(_) => T::AvatarReplacement,
            Self::GenerativeReplacement(_) => T::GenerativeReplacement,
        }
    }

    /// Reads a JSON object of overrides on top of the defaults for `t`.
    /// `null` means all defaults.
    pub fn from_json(t: ObfuscationTechnique, v: &Value) -> Result<Self, ObfuscationError> {
        let bad = |e: serde_json::Error| ObfuscationError::InvalidParams(e.to_string());
        let v = if v.is_null() { json!({}) } else { v.clone() };
        if !v.is_object() {
            return Err(ObfuscationError::InvalidParams("params must be an object".into()));
        }
        let fill_default = |color: Rgba| -> Result<FillParams, ObfuscationError> {
            let mut obj = v.clone();
            if obj.get("color").is_none() {
                obj["color"] = json!(color);
            }
            serde_json::from_value(obj).map_err(bad)
        };
        use ObfuscationTechnique as T;
        let p = match t {
            T::Blurring => Self::Blurring(serde_json::from_value(v).map_err(bad)?),
            T::Pixelating => Self::Pixelating(serde_json::from_value(v).map_err(bad)?),
            T::Masking => Self::Masking(fill_default(DEFAULT_MASK_COLOR)?),
            T::Silhouette => Self::Silhouette(fill_default(DEFAULT_SILHOUETTE_COLOR)?),
            T::BarReplacement => Self::Bar(serde_json::from_value(v).map_err(bad)?),
            T::DotRepresentation => Self::DotRepresentation(serde_json::from_value(v).map_err(bad)?),
            T::Removal => {
                if v.as_object().is_some_and(|o| !o.is_empty()) {
                    return Err(ObfuscationError::InvalidParams("removal takes no parameters".into()));
                }
                Self::Removal
            }
            T::AvatarReplacement => Self::Avatar(serde_json::from_value(v).map_err(bad)?),
            T::GenerativeReplacement => Self::GenerativeReplacement(serde_json::from_value(v).map_err(bad)?),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ObfuscationError> {
        let bad = |m: String| Err(ObfuscationError::InvalidParams(m));
        match self {
            Self::Blurring(p) if !(p.sigma > 0.0 && p.sigma <= MAX_SIGMA) => {
                bad(format!("sigma must be in (0, {MAX_SIGMA}], got {}", p.sigma))
            }
            Self::Pixelating(p) if p.block == 0 => bad("block must be at least 1".into()),
            Self::Bar(p) if !(p.height_fraction > 0.0 && p.height_fraction <= 1.0) => {
                bad(format!("height_fraction must be in (0, 1], got {}", p.height_fraction))
            }
            Self::DotRepresentation(p) if p.dot_radius > MAX_DOT_RADIUS => {
                bad(format!("dot_radius must be at most {MAX_DOT_RADIUS}"))
            }
            Self::Avatar(p) if p.style_prompt.trim().is_empty() => bad("style_prompt must not be empty".into()),
            Self::GenerativeReplacement(p) if p.prompt.trim().is_empty() => Err(ObfuscationError::EmptyPrompt),
            _ => Ok(()),
        }
    }

    /// The prompt sent to the generator, if the technique uses one.
    pub fn generation_prompt(&self) -> Option<&str> {
        match self {
            Self::Removal | Self::Bar(_) | Self::DotRepresentation(_) => Some(REMOVAL_PROMPT),
            Self::Avatar(p) => Some(&p.style_prompt),
            Self::GenerativeReplacement(p) => Some(&p.prompt),
            _ => None,
        }
    }

    /// JSON summary for edit logs. Reference images appear as content hashes.
    pub fn to_json(&self) -> Value {
        let reference = |r: &Option<ImageBuffer>| r.as_ref().map(ImageBuffer::content_hash);
        match self {
            Self::Blurring(p) => json!({"sigma": p.sigma}),
            Self::Pixelating(p) => json!({"block": p.block}),
            Self::Masking(p) | Self::Silhouette(p) => json!({"color": p.color}),
            Self::Bar(p) => json!({"color": p.color, "height_fraction": p.height_fraction}),
            Self::DotRepresentation(p) => {
                json!({"dot_radius": p.dot_radius, "draw_skeleton_lines": p.draw_skeleton_lines})
            }
            Self::Removal => json!({}),
            Self::Avatar(p) => json!({"style_prompt": p.style_prompt, "reference_sha256": reference(&p.reference)}),
            Self::GenerativeReplacement(p) => {
                json!({"prompt": p.prompt, "reference_sha256": reference(&p.reference)})
            }
        }
    }
}
