use super::params::{AvatarParams, BarParams, DotParams, GenerativeParams, DOT_COLOR, REMOVAL_PROMPT};
use super::ObfuscationError;
use crate::backends::{Backends, PoseKeypoints, COCO_SKELETON};
use crate::raster::draw::{draw_line, fill_disk, fill_rect};
use crate::raster::{bbox_of_mask, composite, dilate_mask, BoundingBox, ImageBuffer, RasterError, RegionMask};

/// Generated pixels are trusted only this far around the selection.
pub const GENERATIVE_DILATION: u32 = 2;
pub const MIN_VISIBLE_KEYPOINTS: usize = 5;

fn inpaint(
    img: &ImageBuffer,
    mask: &RegionMask,
    prompt: &str,
    reference: Option<&ImageBuffer>,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    mask.ensure_matches(img)?;
    if mask.is_empty() {
        return Err(RasterError::EmptyMask.into());
    }
    let grown = dilate_mask(mask, GENERATIVE_DILATION);
    let generated = backends.generate_fill(img, &grown, prompt, reference)?;
    Ok(composite(img, &generated, &grown)?)
}

pub fn apply_removal(
    img: &ImageBuffer,
    mask: &RegionMask,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    inpaint(img, mask, REMOVAL_PROMPT, None, backends)
}

pub fn apply_avatar(
    img: &ImageBuffer,
    mask: &RegionMask,
    params: &AvatarParams,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    inpaint(img, mask, &params.style_prompt, params.reference.as_ref(), backends)
}

pub fn apply_generative_replacement(
    img: &ImageBuffer,
    mask: &RegionMask,
    params: &GenerativeParams,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    if params.prompt.trim().is_empty() {
        return Err(ObfuscationError::EmptyPrompt);
    }
    inpaint(img, mask, &params.prompt, params.reference.as_ref(), backends)
}

/// Full-width bar over the upper part of `bb`: its height is
/// `round(fraction * h)` (at least 1) and it is centred on `h / 6`, clamped
/// into the box.
pub fn bar_rect(bb: BoundingBox, fraction: f64) -> BoundingBox {
    let h = bb.h as f64;
    let bar_h = ((fraction * h).round() as u32).clamp(1, bb.h.max(1));
    let offset = (h / 6.0 - bar_h as f64 / 2.0).round().max(0.0) as u32;
    let offset = offset.min(bb.h - bar_h);
    BoundingBox::new(bb.x, bb.y + offset, bb.w, bar_h)
}

pub fn apply_bar(
    img: &ImageBuffer,
    mask: &RegionMask,
    params: &BarParams,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    mask.ensure_matches(img)?;
    let bb = bbox_of_mask(mask)?;
    let mut out = apply_removal(img, mask, backends)?;
    fill_rect(&mut out, bar_rect(bb, params.height_fraction), params.color);
    Ok(out)
}

fn keypoint_pixel(x: f64, y: f64) -> (i64, i64) {
    (x.round() as i64, y.round() as i64)
}

/// Draws the figure only: lines first, then dots on top.
pub fn draw_point_light(img: &mut ImageBuffer, pose: &PoseKeypoints, params: &DotParams) {
    let pts = pose.points();
    if params.draw_skeleton_lines {
        for (a, b) in COCO_SKELETON {
            if pts[a].visible && pts[b].visible {
                draw_line(
                    img,
                    keypoint_pixel(pts[a].x, pts[a].y),
                    keypoint_pixel(pts[b].x, pts[b].y),
                    DOT_COLOR,
                );
            }
        }
    }
    for p in pts.iter().filter(|p| p.visible) {
        let (cx, cy) = keypoint_pixel(p.x, p.y);
        fill_disk(img, cx, cy, params.dot_radius, DOT_COLOR);
    }
}

pub fn apply_point_light(
    img: &ImageBuffer,
    mask: &RegionMask,
    pose: &PoseKeypoints,
    params: &DotParams,
    backends: &Backends,
) -> Result<ImageBuffer, ObfuscationError> {
    let visible = pose.visible_count();
    if visible < MIN_VISIBLE_KEYPOINTS {
        return Err(ObfuscationError::InsufficientKeypoints { visible });
    }
    let mut out = apply_removal(img, mask, backends)?;
    draw_point_light(&mut out, pose, params);
    Ok(out)
}
