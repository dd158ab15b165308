use serde::{Deserialize, Serialize};

use super::{erode_mask, ImageBuffer, RasterError, RegionMask, Rgba};

pub const CONCERN_BORDER_COLOR: Rgba = [0, 255, 0, 255];
pub const DEFAULT_CONCERN_BORDER_THICKNESS: u32 = 3;

/// Draws a green border just inside each connected region of `m`.
pub fn render_concern_overlay(img: &ImageBuffer, m: &RegionMask) -> Result<ImageBuffer, RasterError> {
    render_concern_overlay_with(img, m, DEFAULT_CONCERN_BORDER_THICKNESS)
}

/// The border is `m` minus its Chebyshev erosion by `thickness`, so every
/// component gets a ring of that width and its interior is left alone.
pub fn render_concern_overlay_with(
    img: &ImageBuffer,
    m: &RegionMask,
    thickness: u32,
) -> Result<ImageBuffer, RasterError> {
    m.ensure_matches(img)?;
    let inner = erode_mask(m, thickness);
    let mut out = img.clone();
    for (x, y) in m.iter_selected() {
        if !inner.get(x, y) {
            out.set_pixel(x, y, CONCERN_BORDER_COLOR);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenThresholds {
    pub min_green: u8,
    pub min_green_over_red: u8,
    pub min_green_over_blue: u8,
}

impl Default for GreenThresholds {
    fn default() -> Self {
        Self {
            min_green: 200,
            min_green_over_red: 80,
            min_green_over_blue: 80,
        }
    }
}

impl GreenThresholds {
    fn accepts(&self, p: Rgba) -> bool {
        let (r, g, b) = (p[0] as i16, p[1] as i16, p[2] as i16);
        g >= self.min_green as i16
            && g - r >= self.min_green_over_red as i16
            && g - b >= self.min_green_over_blue as i16
    }
}

/// Pixels the user painted green: changed relative to `original` and
/// green-dominant in `annotated`.
pub fn mask_from_green_annotation(annotated: &ImageBuffer, original: &ImageBuffer) -> Result<RegionMask, RasterError> {
    mask_from_green_annotation_with(annotated, original, GreenThresholds::default())
}

pub fn mask_from_green_annotation_with(
    annotated: &ImageBuffer,
    original: &ImageBuffer,
    thresholds: GreenThresholds,
) -> Result<RegionMask, RasterError> {
    annotated.ensure_same_dims(original.width(), original.height())?;
    RegionMask::from_fn(annotated.width(), annotated.height(), |x, y| {
        let a = annotated.pixel(x, y);
        a != original.pixel(x, y) && thresholds.accepts(a)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32) -> ImageBuffer {
        ImageBuffer::filled(w, h, [128, 128, 128, 255]).unwrap()
    }

    #[test]
    fn empty_mask_leaves_image_alone() {
        let img = gray(6, 6);
        let out = render_concern_overlay(&img, &RegionMask::new(6, 6).unwrap()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_mask_draws_frame_along_canvas_edge() {
        let img = gray(12, 10);
        let out = render_concern_overlay(&img, &RegionMask::full(12, 10).unwrap()).unwrap();
        for y in 0..10 {
            for x in 0..12 {
                let edge = x < 3 || y < 3 || x >= 9 || y >= 7;
                let want = if edge { CONCERN_BORDER_COLOR } else { img.pixel(x, y) };
                assert_eq!(out.pixel(x, y), want, "({x},{y})");
            }
        }
    }

    #[test]
    fn square_region_gets_ring_from_erosion_oracle() {
        let img = gray(20, 20);
        let m = RegionMask::from_fn(20, 20, |x, y| (5..15).contains(&x) && (5..15).contains(&y)).unwrap();
        let out = render_concern_overlay(&img, &m).unwrap();
        // Brute-force erosion: a pixel survives iff its whole 7x7 neighbourhood is selected.
        let eroded = |x: i64, y: i64| (-3..=3).all(|dy| (-3..=3).all(|dx| m.get_or_false(x + dx, y + dy)));
        let mut ring = 0;
        for y in 0..20 {
            for x in 0..20 {
                let border = m.get(x, y) && !eroded(x as i64, y as i64);
                ring += border as usize;
                let want = if border { CONCERN_BORDER_COLOR } else { img.pixel(x, y) };
                assert_eq!(out.pixel(x, y), want);
            }
        }
        assert_eq!(ring, 100 - 16);
    }

    #[test]
    fn overlay_dimension_mismatch() {
        assert!(matches!(
            render_concern_overlay(&gray(4, 4), &RegionMask::new(5, 4).unwrap()),
            Err(RasterError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identical_images_give_empty_mask() {
        let img = gray(8, 8);
        assert!(mask_from_green_annotation(&img, &img).unwrap().is_empty());
    }

    #[test]
    fn green_stroke_is_recovered_exactly() {
        let orig = gray(16, 16);
        let mut painted = orig.clone();
        let stroke: Vec<(u32, u32)> = (2..14)
            .map(|i| (i, (i * 7) % 16))
            .chain((3..9).map(|y| (5, y)))
            .collect();
        for &(x, y) in &stroke {
            painted.set_pixel(x, y, [0, 255, 0, 255]);
        }
        let m = mask_from_green_annotation(&painted, &orig).unwrap();
        // Set-difference oracle over the synthesized fixture.
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(m.get(x, y), painted.pixel(x, y) != orig.pixel(x, y));
            }
        }
        assert!(!m.is_empty());
    }

    #[test]
    fn red_stroke_is_ignored() {
        let orig = gray(8, 8);
        let mut painted = orig.clone();
        for x in 0..8 {
            painted.set_pixel(x, 3, [255, 0, 0, 255]);
        }
        assert!(mask_from_green_annotation(&painted, &orig).unwrap().is_empty());
    }

    #[test]
    fn green_already_in_original_is_not_annotation() {
        let orig = ImageBuffer::filled(4, 4, [0, 255, 0, 255]).unwrap();
        assert!(mask_from_green_annotation(&orig.clone(), &orig).unwrap().is_empty());
    }
}
