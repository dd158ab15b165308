use super::{check_dimensions, BoundingBox, ImageBuffer, RasterError};

/// One boolean per pixel; `true` means selected.
#[derive(Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for RegionMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegionMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("selected", &self.count())
            .finish()
    }
}

impl RegionMask {
    pub fn new(width: u32, height: u32) -> Result<Self, RasterError> {
        check_dimensions(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        })
    }

    pub fn full(width: u32, height: u32) -> Result<Self, RasterError> {
        let mut m = Self::new(width, height)?;
        m.bits.fill(true);
        Ok(m)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self, RasterError> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                m.bits[y as usize * width as usize + x as usize] = f(x, y);
            }
        }
        Ok(m)
    }

    /// Mask covering `bbox` clipped to the canvas.
    pub fn from_box(width: u32, height: u32, bbox: BoundingBox) -> Result<Self, RasterError> {
        Self::from_fn(width, height, |x, y| bbox.contains(x, y))
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

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    /// Out-of-canvas coordinates read as unselected.
    #[inline]
    pub fn get_or_false(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.get(x as u32, y as u32)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter_selected(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask, RasterError> {
        self.ensure_same_dims(other.width, other.height)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(RegionMask { bits, ..*self })
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.dimensions() == other.dimensions() && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
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

    pub(crate) fn ensure_matches(&self, img: &ImageBuffer) -> Result<(), RasterError> {
        img.ensure_same_dims(self.width, self.height)
    }
}

/// Tightest axis-aligned box around the selected pixels.
pub fn bbox_of_mask(m: &RegionMask) -> Result<BoundingBox, RasterError> {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut any = false;
    for (x, y) in m.iter_selected() {
        any = true;
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !any {
        return Err(RasterError::EmptyMask);
    }
    Ok(BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// Chebyshev (square structuring element) dilation, clamped at the borders.
pub fn dilate_mask(m: &RegionMask, radius: u32) -> RegionMask {
    if radius == 0 {
        return m.clone();
    }
    let (w, h) = (m.width as usize, m.height as usize);
    let r = radius as usize;
    // Separable: max over rows, then over columns.
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &m.bits[y * w..(y + 1) * w];
        // Distance to the nearest selected pixel on this row, scanning both ways.
        let mut last: Option<usize> = None;
        for x in 0..w {
            if row[x] {
                last = Some(x);
            }
            if let Some(l) = last {
                if x - l <= r {
                    horiz[y * w + x] = true;
                }
            }
        }
        let mut next: Option<usize> = None;
        for x in (0..w).rev() {
            if row[x] {
                next = Some(x);
            }
            if let Some(n) = next {
                if n - x <= r {
                    horiz[y * w + x] = true;
                }
            }
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if horiz[y * w + x] {
                last = Some(y);
            }
            if let Some(l) = last {
                if y - l <= r {
                    out[y * w + x] = true;
                }
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if horiz[y * w + x] {
                next = Some(y);
            }
            if let Some(n) = next {
                if n - y <= r {
                    out[y * w + x] = true;
                }
            }
        }
    }
    RegionMask {
        width: m.width,
        height: m.height,
        bits: out,
    }
}

/// Chebyshev erosion; pixels off the canvas count as unselected, so a
/// full-canvas mask erodes away from the canvas edge.
pub fn erode_mask(m: &RegionMask, radius: u32) -> RegionMask {
    if radius == 0 {
        return m.clone();
    }
    // erode(m) = !dilate(!m) where the complement is padded with `true`.
    let pad = radius;
    let (pw, ph) = (m.width + 2 * pad, m.height + 2 * pad);
    let complement = RegionMask {
        width: pw,
        height: ph,
        bits: (0..ph)
            .flat_map(|y| (0..pw).map(move |x| (x, y)))
            .map(|(x, y)| !m.get_or_false(x as i64 - pad as i64, y as i64 - pad as i64))
            .collect(),
    };
    let grown = dilate_mask(&complement, radius);
    let mut out = RegionMask {
        width: m.width,
        height: m.height,
        bits: vec![false; m.bits.len()],
    };
    for y in 0..m.height {
        for x in 0..m.width {
            out.set(x, y, !grown.get(x + pad, y + pad));
        }
    }
    out
}

/// Masked paste: overlay where the mask is set, base elsewhere.
pub fn composite(base: &ImageBuffer, overlay: &ImageBuffer, m: &RegionMask) -> Result<ImageBuffer, RasterError> {
    base.ensure_same_dims(overlay.width(), overlay.height())?;
    m.ensure_matches(base)?;
    let mut out = base.clone();
    for (x, y) in m.iter_selected() {
        out.set_pixel(x, y, overlay.pixel(x, y));
    }
    Ok(out)
}
