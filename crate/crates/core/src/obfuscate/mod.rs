//! The nine obfuscation techniques.
//!
//! Classical techniques (blur, pixelate, masking, silhouette) are pure pixel
//! functions. Generative ones call the fill generator and keep only the
//! generated pixels inside the selection grown by
//! [`GENERATIVE_DILATION`]. Bar and point-light first remove the element
//! that way and then draw on top.

mod classical;
mod generative;
pub mod params;

use thiserror::Error;

use crate::backends::{BackendError, Backends, PoseKeypoints};
use crate::raster::{bbox_of_mask, dilate_mask, rasterize_contour, Contour, ImageBuffer, RasterError, RegionMask};
use crate::risk::ObfuscationTechnique;

pub use classical::{apply_blur, apply_mask_fill, apply_pixelate, apply_silhouette, gaussian_kernel};
pub use generative::{
    apply_avatar, apply_bar, apply_generative_replacement, apply_point_light, apply_removal, bar_rect,
    draw_point_light, GENERATIVE_DILATION, MIN_VISIBLE_KEYPOINTS,
};
pub use params::{
    parse_color, AvatarParams, BarParams, BlurParams, DotParams, FillParams, GenerativeParams, PixelateParams,
    TechniqueParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObfuscationError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("generative replacement needs a prompt")]
    EmptyPrompt,
    #[error("point-light replacement needs at least {MIN_VISIBLE_KEYPOINTS} visible keypoints, got {visible}")]
    InsufficientKeypoints { visible: usize },
    #[error("parameters are for {got}, not {expected}")]
    ParamsMismatch {
        expected: ObfuscationTechnique,
        got: ObfuscationTechnique,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl ObfuscationError {
    pub fn code(&self) -> &'static str {
        match self {
            ObfuscationError::Raster(RasterError::EmptyMask) => "empty_mask",
            ObfuscationError::Raster(RasterError::DimensionMismatch { .. }) => "dimension_mismatch",
            ObfuscationError::Raster(_) => "invalid_selection",
            ObfuscationError::InvalidParams(_) | ObfuscationError::ParamsMismatch { .. } => "invalid_params",
            ObfuscationError::EmptyPrompt => "empty_prompt",
            ObfuscationError::InsufficientKeypoints { .. } => "insufficient_keypoints",
            ObfuscationError::Backend(e) => e.code(),
        }
    }
}

/// What to obfuscate: a polygon or a ready pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Contour(Contour),
    Mask(RegionMask),
}

impl Selection {
    pub fn to_mask(&self, width: u32, height: u32) -> Result<RegionMask, RasterError> {
        match self {
            Selection::Contour(c) => rasterize_contour(c, width, height),
            Selection::Mask(m) => {
                m.ensure_same_dims(width, height)?;
                Ok(m.clone())
            }
        }
    }
}

/// Applies `technique` to the selected region. Point-light replacement asks
/// the pose backend for keypoints inside the selection's bounding box.
pub fn apply(
    technique: ObfuscationTechnique,
    img: &ImageBuffer,
    selection: &Selection,
    params: &TechniqueParams,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    apply_traced(technique, img, selection, params, backends).map(|(out, _)| out)
}

/// [`apply`], also returning the footprint the edit was allowed to touch.
pub fn apply_traced(
    technique: ObfuscationTechnique,
    img: &ImageBuffer,
    selection: &Selection,
    params: &TechniqueParams,
    backends: &Backends,
) -> Result<(ImageBuffer, RegionMask), ObfuscationError> {
    if params.technique() != technique {
        return Err(ObfuscationError::ParamsMismatch {
            expected: technique,
            got: params.technique(),
        });
    }
    params.validate()?;
    let mask = selection.to_mask(img.width(), img.height())?;
    let mut pose = None;
    let out = match params {
        TechniqueParams::Blurring(p) => apply_blur(img, &mask, p.sigma),
        TechniqueParams::Pixelating(p) => apply_pixelate(img, &mask, p.block),
        TechniqueParams::Masking(p) => apply_mask_fill(img, &mask, p.color),
        TechniqueParams::Silhouette(p) => apply_silhouette(img, &mask, p.color),
        TechniqueParams::Bar(p) => apply_bar(img, &mask, p, backends),
        TechniqueParams::DotRepresentation(p) => {
            let bb = bbox_of_mask(&mask)?;
            let kp = backends.estimate_pose(img, bb)?;
            let out = apply_point_light(img, &mask, &kp, p, backends);
            pose = Some(kp);
            out
        }
        TechniqueParams::Removal => apply_removal(img, &mask, backends),
        TechniqueParams::Avatar(p) => apply_avatar(img, &mask, p, backends),
        TechniqueParams::GenerativeReplacement(p) => apply_generative_replacement(img, &mask, p, backends),
    }?;
    let fp = footprint(&mask, params, pose.as_ref())?;
    Ok((out, fp))
}

/// Pixels an edit may change: the mask for blur, pixelation and
/// silhouette; mask plus bounding box for masking; the mask grown by
/// [`GENERATIVE_DILATION`] for generated fills, plus the bar or the drawn
/// point-light figure where those apply.
pub fn footprint(
    mask: &RegionMask,
    params: &TechniqueParams,
    pose: Option<&PoseKeypoints>,
) -> Result<RegionMask, ObfuscationError> {
    let (w, h) = (mask.width(), mask.height());
    let fp = match params {
        TechniqueParams::Blurring(_) | TechniqueParams::Pixelating(_) | TechniqueParams::Silhouette(_) => mask.clone(),
        TechniqueParams::Masking(_) => RegionMask::from_box(w, h, bbox_of_mask(mask)?)?.union(mask)?,
        TechniqueParams::Removal | TechniqueParams::Avatar(_) | TechniqueParams::GenerativeReplacement(_) => {
            dilate_mask(mask, GENERATIVE_DILATION)
        }
        TechniqueParams::Bar(p) => {
            let bar = bar_rect(bbox_of_mask(mask)?, p.height_fraction);
            dilate_mask(mask, GENERATIVE_DILATION).union(&RegionMask::from_box(w, h, bar)?)?
        }
        TechniqueParams::DotRepresentation(p) => {
            let grown = dilate_mask(mask, GENERATIVE_DILATION);
            match pose {
                Some(kp) => {
                    let mut canvas = ImageBuffer::filled(w, h, [0; 4])?;
                    draw_point_light(&mut canvas, kp, p);
                    let figure = RegionMask::from_fn(w, h, |x, y| canvas.pixel(x, y) != [0; 4])?;
                    grown.union(&figure)?
                }
                None => grown,
            }
        }
    };
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendRole, Keypoint, MockPose, MockSet, PoseKeypoints, KEYPOINT_COUNT};
    use crate::raster::{dilate_mask, BoundingBox, Point};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn scene(w: u32, h: u32) -> ImageBuffer {
        let data = (0..w * h * 4).map(|i| (i * 37 % 251) as u8).collect();
        ImageBuffer::from_raw(w, h, data).unwrap()
    }

    fn sample_params(t: ObfuscationTechnique) -> TechniqueParams {
        match TechniqueParams::default_for(t) {
            TechniqueParams::GenerativeReplacement(_) => TechniqueParams::GenerativeReplacement(GenerativeParams {
                prompt: "a potted plant".into(),
                reference: None,
            }),
            TechniqueParams::Blurring(_) => TechniqueParams::Blurring(BlurParams { sigma: 2.0 }),
            TechniqueParams::Pixelating(_) => TechniqueParams::Pixelating(PixelateParams { block: 3 }),
            p => p,
        }
    }

    fn standing_pose() -> PoseKeypoints {
        let mut pts = [Keypoint::HIDDEN; KEYPOINT_COUNT];
        for (i, p) in pts.iter_mut().enumerate() {
            *p = Keypoint {
                x: 8.0 + (i % 3) as f64 * 3.0,
                y: 6.0 + i as f64,
                visible: true,
            };
        }
        PoseKeypoints::new(pts)
    }

    #[test]
    fn every_technique_dispatches() {
        let img = scene(32, 32);
        let bbox = BoundingBox::new(6, 4, 12, 20);
        let set = MockSet {
            pose: Arc::new(MockPose::default().with(img.content_hash(), bbox, standing_pose())),
            ..MockSet::default()
        };
        let sel = Selection::Mask(RegionMask::from_box(32, 32, bbox).unwrap());
        for t in ObfuscationTechnique::ALL {
            let out = apply(t, &img, &sel, &sample_params(t), &set.backends()).unwrap();
            assert_ne!(out, img, "{t:?} changed nothing");
        }
    }

    #[test]
    fn every_technique_stays_in_its_footprint() {
        let img = scene(32, 32);
        let bbox = BoundingBox::new(6, 4, 12, 20);
        let set = MockSet {
            pose: Arc::new(MockPose::default().with(img.content_hash(), bbox, standing_pose())),
            ..MockSet::default()
        };
        // L-shaped selection whose box is wider than the mask.
        let mask = RegionMask::from_fn(32, 32, |x, y| bbox.contains(x, y) && (x < 10 || y >= 20)).unwrap();
        let sel = Selection::Mask(mask.clone());
        for t in ObfuscationTechnique::ALL {
            let (out, fp) = apply_traced(t, &img, &sel, &sample_params(t), &set.backends()).unwrap();
            assert!(untouched_outside(&img, &out, &fp), "{t}");
            assert!(mask.iter_selected().all(|(x, y)| fp.get(x, y)), "{t}");
        }
        let boxed = footprint(
            &mask,
            &TechniqueParams::default_for(ObfuscationTechnique::Masking),
            None,
        )
        .unwrap();
        assert_eq!(boxed, RegionMask::from_box(32, 32, bbox).unwrap());
    }

    #[test]
    fn blurring_routes_to_blur() {
        let img = scene(16, 16);
        let sel = Selection::Contour(Contour::from_box(BoundingBox::new(2, 2, 8, 8)));
        let mask = sel.to_mask(16, 16).unwrap();
        let params = TechniqueParams::Blurring(BlurParams { sigma: 1.5 });
        let via_apply = apply(
            ObfuscationTechnique::Blurring,
            &img,
            &sel,
            &params,
            &Backends::default(),
        )
        .unwrap();
        assert_eq!(via_apply, apply_blur(&img, &mask, 1.5).unwrap());
    }

    #[test]
    fn dots_without_pose_backend() {
        let img = scene(16, 16);
        let mut b = MockSet::default().backends();
        b.pose = None;
        let sel = Selection::Mask(RegionMask::full(16, 16).unwrap());
        let err = apply(
            ObfuscationTechnique::DotRepresentation,
            &img,
            &sel,
            &TechniqueParams::default_for(ObfuscationTechnique::DotRepresentation),
            &b,
        )
        .unwrap_err();
        assert_eq!(err, ObfuscationError::Backend(BackendError::Missing(BackendRole::Pose)));
        assert_eq!(err.code(), "backend_missing");
    }

    #[test]
    fn params_must_match_technique() {
        let img = scene(4, 4);
        let sel = Selection::Mask(RegionMask::full(4, 4).unwrap());
        let err = apply(
            ObfuscationTechnique::Pixelating,
            &img,
            &sel,
            &TechniqueParams::default_for(ObfuscationTechnique::Blurring),
            &Backends::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ObfuscationError::ParamsMismatch { .. }));
    }

    #[test]
    fn contour_selection_is_rasterized() {
        let sel = Selection::Contour(
            Contour::new(vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 4.0)]).unwrap(),
        );
        let m = sel.to_mask(8, 8).unwrap();
        assert!(m.get(0, 0) && !m.get(3, 3));
    }

    fn arb_case() -> impl Strategy<Value = (ImageBuffer, RegionMask)> {
        (2u32..20, 2u32..20).prop_flat_map(|(w, h)| {
            let n = (w * h) as usize;
            (
                proptest::collection::vec(any::<u8>(), n * 4),
                proptest::collection::vec(prop::bool::weighted(0.3), n),
            )
                .prop_map(move |(px, bits)| {
                    let img = ImageBuffer::from_raw(w, h, px).unwrap();
                    let mask = RegionMask::from_fn(w, h, |x, y| bits[(y * w + x) as usize]).unwrap();
                    (img, mask)
                })
        })
    }

    fn untouched_outside(a: &ImageBuffer, b: &ImageBuffer, allowed: &RegionMask) -> bool {
        (0..a.height()).all(|y| (0..a.width()).all(|x| allowed.get(x, y) || a.pixel(x, y) == b.pixel(x, y)))
    }

    proptest! {
        #[test]
        fn classical_locality((img, mask) in arb_case(), sigma in 0.5f64..4.0, block in 1u32..6) {
            prop_assume!(!mask.is_empty());
            let blurred = apply_blur(&img, &mask, sigma).unwrap();
            prop_assert!(untouched_outside(&img, &blurred, &mask));
            let pix = apply_pixelate(&img, &mask, block).unwrap();
            prop_assert!(untouched_outside(&img, &pix, &mask));
            let sil = apply_silhouette(&img, &mask, [1, 2, 3, 255]).unwrap();
            prop_assert!(untouched_outside(&img, &sil, &mask));
            let boxed = apply_mask_fill(&img, &mask, [0, 0, 0, 255]).unwrap();
            let bb = RegionMask::from_box(img.width(), img.height(), bbox_of_mask(&mask).unwrap()).unwrap();
            prop_assert!(untouched_outside(&img, &boxed, &bb));
        }

        #[test]
        fn generative_locality((img, mask) in arb_case(), prompt in "[a-z ]{1,12}") {
            prop_assume!(!mask.is_empty() && !prompt.trim().is_empty());
            let set = MockSet::default();
            let b = set.backends();
            let grown = dilate_mask(&mask, GENERATIVE_DILATION);
            let gp = GenerativeParams { prompt, reference: None };
            prop_assert!(untouched_outside(&img, &apply_removal(&img, &mask, &b).unwrap(), &grown));
            prop_assert!(untouched_outside(&img, &apply_avatar(&img, &mask, &AvatarParams::default(), &b).unwrap(), &grown));
            prop_assert!(untouched_outside(&img, &apply_generative_replacement(&img, &mask, &gp, &b).unwrap(), &grown));
        }

        #[test]
        fn classical_determinism((img, mask) in arb_case()) {
            prop_assume!(!mask.is_empty());
            prop_assert_eq!(apply_blur(&img, &mask, 2.0).unwrap(), apply_blur(&img, &mask, 2.0).unwrap());
            prop_assert_eq!(apply_pixelate(&img, &mask, 3).unwrap(), apply_pixelate(&img, &mask, 3).unwrap());
        }
    }
}
