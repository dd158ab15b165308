use serde::Serialize;

use super::PromptError;
use crate::backends::Detection;
use crate::raster::draw::{draw_rect_outline, draw_text, TEXT_HEIGHT};
use crate::raster::ImageBuffer;

pub const PRESCAN_BOX_COLOR: [u8; 4] = [255, 0, 0, 255];
pub const PRESCAN_BOX_THICKNESS: u32 = 2;

/// Detector output rendered for set-of-mark prompting.
#[derive(Debug, Clone, PartialEq)]
pub struct PreScan {
    pub detections: Vec<Detection>,
    /// Source image with red boxes and labels burned in.
    pub annotated_image: ImageBuffer,
    /// JSON listing of the detections, same order.
    pub object_dictionary: String,
}

#[derive(Serialize)]
struct Position {
    x: u32,
    y: u32,
}

#[derive(Serialize)]
struct DictionaryEntry<'a> {
    id: usize,
    label: &'a str,
    position: Position,
    width: u32,
    length: u32,
    confidence: f64,
}

/// Top-left corner of a detection's label: above the box when there is room,
/// otherwise just inside its top edge.
pub fn label_origin(d: &Detection) -> (i64, i64) {
    let above = d.bbox.y as i64 - TEXT_HEIGHT as i64 - 1;
    if above >= 0 {
        (d.bbox.x as i64, above)
    } else {
        (
            d.bbox.x as i64 + PRESCAN_BOX_THICKNESS as i64,
            d.bbox.y as i64 + PRESCAN_BOX_THICKNESS as i64,
        )
    }
}

pub fn build_prescan(img: &ImageBuffer, detections: Vec<Detection>) -> Result<PreScan, PromptError> {
    let (w, h) = img.dimensions();
    for d in &detections {
        if !d.bbox.fits_within(w, h) {
            return Err(PromptError::BoxOutOfBounds {
                label: d.label.clone(),
                bbox: d.bbox,
            });
        }
    }
    let mut annotated = img.clone();
    for d in &detections {
        draw_rect_outline(&mut annotated, d.bbox, PRESCAN_BOX_THICKNESS, PRESCAN_BOX_COLOR);
    }
    // Labels after all boxes so a neighbouring outline never paints over text.
    for d in &detections {
        let (x, y) = label_origin(d);
        draw_text(&mut annotated, x, y, &d.label, PRESCAN_BOX_COLOR);
    }
    let entries: Vec<_> = detections
        .iter()
        .enumerate()
        .map(|(i, d)| DictionaryEntry {
            id: i + 1,
            label: &d.label,
            position: Position {
                x: d.bbox.x,
                y: d.bbox.y,
            },
            width: d.bbox.w,
            length: d.bbox.h,
            confidence: d.confidence,
        })
        .collect();
    let object_dictionary = serde_json::to_string_pretty(&entries).expect("dictionary serializes");
    Ok(PreScan {
        detections,
        annotated_image: annotated,
        object_dictionary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BoundingBox;
    use font8x8::legacy::BASIC_LEGACY;
    use std::collections::HashSet;

    fn det(label: &str, b: BoundingBox, c: f64) -> Detection {
        Detection {
            label: label.into(),
            bbox: b,
            confidence: c,
        }
    }

    #[test]
    fn zero_detections() {
        let img = ImageBuffer::filled(16, 16, [40, 50, 60, 255]).unwrap();
        let scan = build_prescan(&img, vec![]).unwrap();
        assert_eq!(scan.annotated_image, img);
        assert_eq!(scan.object_dictionary, "[]");
    }

    #[test]
    fn one_detection_changes_only_outline_and_label() {
        let img = ImageBuffer::filled(64, 64, [40, 50, 60, 255]).unwrap();
        let b = BoundingBox::new(10, 10, 20, 20);
        let scan = build_prescan(&img, vec![det("human face", b, 0.9)]).unwrap();

        // Reference rendering: outline by geometry, label straight from the font table.
        let mut expected: HashSet<(i64, i64)> = HashSet::new();
        for y in 10..30i64 {
            for x in 10..30i64 {
                if x < 12 || y < 12 || x >= 28 || y >= 28 {
                    expected.insert((x, y));
                }
            }
        }
        // No room above y=10 for a 12 px label, so it sits inside at (12, 12).
        for (i, ch) in "human face".bytes().enumerate() {
            let glyph = BASIC_LEGACY[ch as usize];
            for row in 0..12i64 {
                let bits = glyph[(row * 8 / 12) as usize];
                for col in 0..8i64 {
                    if bits & (1 << col) != 0 {
                        let (x, y) = (12 + i as i64 * 8 + col, 12 + row);
                        if x < 64 && y < 64 {
                            expected.insert((x, y));
                        }
                    }
                }
            }
        }
        let mut changed = HashSet::new();
        for y in 0..64u32 {
            for x in 0..64u32 {
                let p = scan.annotated_image.pixel(x, y);
                if p != img.pixel(x, y) {
                    assert_eq!(p, PRESCAN_BOX_COLOR);
                    changed.insert((x as i64, y as i64));
                }
            }
        }
        assert_eq!(changed, expected);

        let dict: serde_json::Value = serde_json::from_str(&scan.object_dictionary).unwrap();
        assert_eq!(
            dict,
            serde_json::json!([{"id": 1, "label": "human face", "position": {"x": 10, "y": 10},
                                "width": 20, "length": 20, "confidence": 0.9}])
        );
    }

    #[test]
    fn label_goes_above_when_there_is_room() {
        let d = det("cup", BoundingBox::new(5, 30, 10, 10), 0.5);
        assert_eq!(label_origin(&d), (5, 17));
    }

    #[test]
    fn box_outside_canvas() {
        let img = ImageBuffer::filled(16, 16, [0; 4]).unwrap();
        let err = build_prescan(&img, vec![det("car", BoundingBox::new(10, 10, 10, 4), 0.7)]).unwrap_err();
        assert!(matches!(err, PromptError::BoxOutOfBounds { .. }));
    }

    #[test]
    fn dictionary_is_stable() {
        let img = ImageBuffer::filled(40, 40, [0; 4]).unwrap();
        let dets = vec![
            det("person", BoundingBox::new(1, 1, 10, 30), 0.8),
            det("cup", BoundingBox::new(20, 20, 5, 5), 0.3),
        ];
        let a = build_prescan(&img, dets.clone()).unwrap();
        let b = build_prescan(&img, dets).unwrap();
        assert_eq!(a, b);
    }
}
