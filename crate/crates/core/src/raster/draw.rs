//! Deterministic drawing helpers. Everything clips silently at the canvas edge.

use font8x8::legacy::BASIC_LEGACY;

use super::{BoundingBox, ImageBuffer, Rgba};

/// Rendered text height in pixels.
pub const TEXT_HEIGHT: u32 = 12;
/// Horizontal advance per character.
pub const GLYPH_ADVANCE: u32 = 8;

/// Outline drawn inward from the box edge.
pub fn draw_rect_outline(img: &mut ImageBuffer, b: BoundingBox, thickness: u32, color: Rgba) {
    let t = thickness as u64;
    for y in b.y as u64..b.bottom() {
        for x in b.x as u64..b.right() {
            let edge = x - (b.x as u64) < t || y - (b.y as u64) < t || b.right() - x <= t || b.bottom() - y <= t;
            if edge {
                img.put_clipped(x as i64, y as i64, color);
            }
        }
    }
}

pub fn fill_rect(img: &mut ImageBuffer, b: BoundingBox, color: Rgba) {
    for y in b.y as u64..b.bottom() {
        for x in b.x as u64..b.right() {
            img.put_clipped(x as i64, y as i64, color);
        }
    }
}

/// Pixels `(x, y)` with `(x - cx)^2 + (y - cy)^2 <= r^2`.
pub fn fill_disk(img: &mut ImageBuffer, cx: i64, cy: i64, radius: u32, color: Rgba) {
    let r = radius as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                img.put_clipped(cx + dx, cy + dy, color);
            }
        }
    }
}

/// 1 px Bresenham line, endpoints included.
pub fn draw_line(img: &mut ImageBuffer, from: (i64, i64), to: (i64, i64), color: Rgba) {
    for (x, y) in line_pixels(from, to) {
        img.put_clipped(x, y, color);
    }
}

pub fn line_pixels((mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64)) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x0, y0));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    out
}

pub fn text_width(text: &str) -> u32 {
    text.chars().count() as u32 * GLYPH_ADVANCE
}

/// Draws `text` with its top-left corner at `(x, y)` using the 8x8 basic
/// bitmap font stretched vertically to 12 px. Non-ASCII characters render
/// as `?`.
pub fn draw_text(img: &mut ImageBuffer, x: i64, y: i64, text: &str, color: Rgba) {
    for (i, ch) in text.chars().enumerate() {
        let code = if ch.is_ascii() { ch as usize } else { '?' as usize };
        let glyph = BASIC_LEGACY[code];
        let ox = x + (i as i64) * GLYPH_ADVANCE as i64;
        for row in 0..TEXT_HEIGHT {
            let bits = glyph[(row * 8 / TEXT_HEIGHT) as usize];
            for col in 0..8 {
                if bits & (1 << col) != 0 {
                    img.put_clipped(ox + col, y + row as i64, color);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outline_two_px_on_ten_box() {
        let mut img = ImageBuffer::filled(20, 20, [0; 4]).unwrap();
        draw_rect_outline(&mut img, BoundingBox::new(5, 5, 10, 10), 2, [255, 0, 0, 255]);
        let changed = img.as_raw().chunks_exact(4).filter(|p| p[0] == 255).count();
        assert_eq!(changed, 100 - 36);
        assert_eq!(img.pixel(5, 5), [255, 0, 0, 255]);
        assert_eq!(img.pixel(7, 7), [0; 4]);
        assert_eq!(img.pixel(14, 14), [255, 0, 0, 255]);
    }

    #[test]
    fn disk_radius_one_is_plus_shape() {
        let mut img = ImageBuffer::filled(5, 5, [0; 4]).unwrap();
        fill_disk(&mut img, 2, 2, 1, [9; 4]);
        let set: Vec<_> = (0..25).filter(|i| img.pixel(i % 5, i / 5) == [9; 4]).collect();
        assert_eq!(set, vec![7, 11, 12, 13, 17]);
    }

    #[test]
    fn bresenham_endpoints_and_length() {
        let px = line_pixels((0, 0), (5, 2));
        assert_eq!(px.first(), Some(&(0, 0)));
        assert_eq!(px.last(), Some(&(5, 2)));
        assert_eq!(px.len(), 6);
        assert_eq!(line_pixels((3, 3), (3, 3)), vec![(3, 3)]);
    }

    #[test]
    fn text_is_deterministic_and_clipped() {
        let mut a = ImageBuffer::filled(30, 10, [0; 4]).unwrap();
        let mut b = a.clone();
        draw_text(&mut a, -3, -2, "Hi!", [255; 4]);
        draw_text(&mut b, -3, -2, "Hi!", [255; 4]);
        assert_eq!(a, b);
        assert!(a.as_raw().contains(&255));
        assert_eq!(text_width("abc"), 24);
    }
}
