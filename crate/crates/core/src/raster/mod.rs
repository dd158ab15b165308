//! Pixel-level primitives: RGBA buffers, binary masks, polygon contours and
//! the compositing rules every obfuscation is built on.
//!
//! Coordinates are top-left origin, x to the right, y downward. Pixel `(x, y)`
//! has its center at `(x + 0.5, y + 0.5)`.

mod codec;
mod contour;
pub mod draw;
mod mask;
mod overlay;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use codec::{decode_mask_png, encode_mask_png, is_color_image, load_image, save_image, ImageFormat};
pub use contour::{rasterize_contour, Contour, Point};
pub use mask::{bbox_of_mask, composite, dilate_mask, erode_mask, RegionMask};
pub use overlay::{
    mask_from_green_annotation, mask_from_green_annotation_with, render_concern_overlay, render_concern_overlay_with,
    GreenThresholds, CONCERN_BORDER_COLOR, DEFAULT_CONCERN_BORDER_THICKNESS,
};

/// Largest accepted side length, in pixels.
pub const MAX_DIMENSION: u32 = 16384;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RasterError {
    #[error("unsupported image format")]
    UnsupportedFormat,
    #[error("corrupt image data: {0}")]
    CorruptData(String),
    #[error("failed to encode image: {0}")]
    EncodeFailure(String),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("mask is empty")]
    EmptyMask,
    #[error("degenerate contour: {0}")]
    DegenerateContour(String),
    #[error("invalid dimensions {0}x{1}")]
    InvalidDimensions(u32, u32),
    #[error("pixel buffer length {actual} does not match {width}x{height}x4")]
    BadBufferLength { width: u32, height: u32, actual: usize },
}

pub type Rgba = [u8; 4];

fn check_dimensions(width: u32, height: u32) -> Result<(), RasterError> {
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(RasterError::InvalidDimensions(width, height));
    }
    Ok(())
}

/// An 8-bit RGBA image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        check_dimensions(width, height)?;
        if data.len() != width as usize * height as usize * 4 {
            return Err(RasterError::BadBufferLength {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, color: Rgba) -> Result<Self, RasterError> {
        check_dimensions(width, height)?;
        let data = color
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 4)
            .collect();
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> Rgba {
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, color: Rgba) {
        let i = self.offset(x, y);
        self.data[i..i + 4].copy_from_slice(&color);
    }

    /// Sets the pixel if `(x, y)` falls on the canvas; silently clips otherwise.
    pub fn put_clipped(&mut self, x: i64, y: i64, color: Rgba) {
        if x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64 {
            self.set_pixel(x as u32, y as u32, color);
        }
    }

    /// Hex SHA-256 over the dimensions and raw pixels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.data);
        hex::encode(h.finalize())
    }

    pub fn ensure_same_dims(&self, w: u32, h: u32) -> Result<(), RasterError> {
        if (self.width, self.height) != (w, h) {
            return Err(RasterError::DimensionMismatch {
                expected: (self.width, self.height),
                actual: (w, h),
            });
        }
        Ok(())
    }
}

/// Axis-aligned pixel box. `x`/`y` is the top-left pixel; the box covers
/// columns `x..x + w` and rows `y..y + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        !self.is_empty() && self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && (x as u64) < self.right() && y >= self.y && (y as u64) < self.bottom()
    }

    /// Clamps the box onto a `width` x `height` canvas. Returns `None` when
    /// nothing of it remains.
    pub fn clamped(&self, width: u32, height: u32) -> Option<Self> {
        let x1 = self.right().min(width as u64);
        let y1 = self.bottom().min(height as u64);
        if self.x as u64 >= x1 || self.y as u64 >= y1 {
            return None;
        }
        Some(Self {
            x: self.x,
            y: self.y,
            w: (x1 - self.x as u64) as u32,
            h: (y1 - self.y as u64) as u32,
        })
    }

    /// Box grown by `fraction` of its size on every side, in float coordinates
    /// `(x0, y0, x1, y1)`.
    pub fn expanded(&self, fraction: f64) -> (f64, f64, f64, f64) {
        let dx = self.w as f64 * fraction;
        let dy = self.h as f64 * fraction;
        (
            self.x as f64 - dx,
            self.y as f64 - dy,
            self.right() as f64 + dx,
            self.bottom() as f64 + dy,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_length_is_validated() {
        assert!(ImageBuffer::from_raw(2, 2, vec![0; 16]).is_ok());
        assert!(matches!(
            ImageBuffer::from_raw(2, 2, vec![0; 15]),
            Err(RasterError::BadBufferLength { .. })
        ));
        assert!(matches!(
            ImageBuffer::from_raw(0, 2, vec![]),
            Err(RasterError::InvalidDimensions(0, 2))
        ));
    }

    #[test]
    fn hash_depends_on_dimensions() {
        let a = ImageBuffer::filled(2, 4, [1, 2, 3, 4]).unwrap();
        let b = ImageBuffer::filled(4, 2, [1, 2, 3, 4]).unwrap();
        assert_eq!(a.as_raw(), b.as_raw());
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn bbox_clamping() {
        let b = BoundingBox::new(6, 6, 10, 10);
        assert_eq!(b.clamped(8, 8), Some(BoundingBox::new(6, 6, 2, 2)));
        assert_eq!(BoundingBox::new(9, 0, 2, 2).clamped(8, 8), None);
        assert!(!b.fits_within(8, 8));
        assert!(BoundingBox::new(0, 0, 8, 8).fits_within(8, 8));
    }
}
