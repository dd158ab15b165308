use super::ObfuscationError;
use crate::raster::{bbox_of_mask, ImageBuffer, RasterError, RegionMask, Rgba};

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

fn check_sigma(sigma: f64) -> Result<(), ObfuscationError> {
    if sigma > 0.0 && sigma <= super::params::MAX_SIGMA {
        Ok(())
    } else {
        Err(ObfuscationError::InvalidParams(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

/// Gaussian blur of the whole image with clamped edges, pasted back through
/// the mask. Only the rows and columns that feed masked pixels are computed.
pub fn apply_blur(img: &ImageBuffer, mask: &RegionMask, sigma: f64) -> Result<ImageBuffer, ObfuscationError> {
    mask.ensure_matches(img)?;
    check_sigma(sigma)?;
    let Ok(bb) = bbox_of_mask(mask) else {
        return Ok(img.clone());
    };
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let clamp = |v: i64, hi: i64| v.clamp(0, hi - 1) as u32;

    // Horizontal pass over every row the vertical pass will read.
    let y0 = (bb.y as i64 - r).max(0);
    let y1 = (bb.bottom() as i64 + r).min(h);
    let (x0, x1) = (bb.x as i64, bb.right() as i64);
    let cols = (x1 - x0) as usize;
    let mut horiz = vec![[0.0f64; 4]; cols * (y1 - y0) as usize];
    for y in y0..y1 {
        for x in x0..x1 {
            let mut acc = [0.0f64; 4];
            for (k, wt) in kernel.iter().enumerate() {
                let p = img.pixel(clamp(x + k as i64 - r, w), y as u32);
                for c in 0..4 {
                    acc[c] += wt * p[c] as f64;
                }
            }
            horiz[(y - y0) as usize * cols + (x - x0) as usize] = acc;
        }
    }

    let mut out = img.clone();
    for (x, y) in mask.iter_selected() {
        let mut acc = [0.0f64; 4];
        for (k, wt) in kernel.iter().enumerate() {
            let sy = (y as i64 + k as i64 - r).clamp(0, h - 1);
            let row = &horiz[(sy - y0) as usize * cols..];
            let v = row[(x as i64 - x0) as usize];
            for c in 0..4 {
                acc[c] += wt * v[c];
            }
        }
        out.set_pixel(x, y, acc.map(|v| v.round().clamp(0.0, 255.0) as u8));
    }
    Ok(out)
}

/// Block averaging on a grid anchored at the mask's bounding box. Only
/// masked pixels are read or written.
pub fn apply_pixelate(img: &ImageBuffer, mask: &RegionMask, block: u32) -> Result<ImageBuffer, ObfuscationError> {
    mask.ensure_matches(img)?;
    if block == 0 {
        return Err(ObfuscationError::InvalidParams("block must be at least 1".into()));
    }
    let bb = bbox_of_mask(mask)?;
    let gw = bb.w.div_ceil(block) as usize;
    let gh = bb.h.div_ceil(block) as usize;
    let cell = |x: u32, y: u32| ((y - bb.y) / block) as usize * gw + ((x - bb.x) / block) as usize;

    let mut sums = vec![([0u64; 4], 0u64); gw * gh];
    for (x, y) in mask.iter_selected() {
        let p = img.pixel(x, y);
        let s = &mut sums[cell(x, y)];
        for c in 0..4 {
            s.0[c] += p[c] as u64;
        }
        s.1 += 1;
    }
    let means: Vec<Rgba> = sums
        .iter()
        .map(|(s, n)| {
            if *n == 0 {
                [0; 4]
            } else {
                s.map(|v| ((v + n / 2) / n) as u8)
            }
        })
        .collect();
    let mut out = img.clone();
    for (x, y) in mask.iter_selected() {
        out.set_pixel(x, y, means[cell(x, y)]);
    }
    Ok(out)
}

/// Solid fill of the mask's bounding box.
pub fn apply_mask_fill(img: &ImageBuffer, mask: &RegionMask, color: Rgba) -> Result<ImageBuffer, ObfuscationError> {
    mask.ensure_matches(img)?;
    let bb = bbox_of_mask(mask)?;
    let mut out = img.clone();
    crate::raster::draw::fill_rect(&mut out, bb, color);
    Ok(out)
}

/// Solid fill of exactly the masked pixels.
pub fn apply_silhouette(img: &ImageBuffer, mask: &RegionMask, color: Rgba) -> Result<ImageBuffer, ObfuscationError> {
    mask.ensure_matches(img)?;
    if mask.is_empty() {
        return Err(RasterError::EmptyMask.into());
    }
    let mut out = img.clone();
    for (x, y) in mask.iter_selected() {
        out.set_pixel(x, y, color);
    }
    Ok(out)
}
