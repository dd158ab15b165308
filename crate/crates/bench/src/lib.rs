//! Synthetic inputs shared by the benchmarks.

use veil_core::raster::{Contour, ImageBuffer, Point, RegionMask};

/// Deterministic gradient with some high-frequency texture.
pub fn test_image(w: u32, h: u32) -> ImageBuffer {
    let mut px = Vec::with_capacity((w * h * 4) as usize);
    for y in 0..h {
        for x in 0..w {
            let n = (x.wrapping_mul(73) ^ y.wrapping_mul(151)) as u8;
            px.extend_from_slice(&[(x * 255 / w.max(1)) as u8, (y * 255 / h.max(1)) as u8, n, 255]);
        }
    }
    ImageBuffer::from_raw(w, h, px).expect("buffer size matches")
}

/// Regular polygon with `n` vertices, inscribed in the central half of the frame.
pub fn polygon(w: u32, h: u32, n: usize) -> Contour {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let r = w.min(h) as f64 / 4.0;
    let pts = (0..n)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / n as f64;
            Point {
                x: cx + r * a.cos(),
                y: cy + r * a.sin(),
            }
        })
        .collect();
    Contour::new(pts).expect("regular polygon is valid")
}

/// Filled ellipse covering roughly a fifth of the frame.
pub fn ellipse_mask(w: u32, h: u32) -> RegionMask {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let (rx, ry) = (w as f64 / 4.0, h as f64 / 4.0);
    RegionMask::from_fn(w, h, |x, y| {
        let dx = (x as f64 + 0.5 - cx) / rx;
        let dy = (y as f64 + 0.5 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    })
    .expect("non-zero size")
}
