use serde::{Deserialize, Serialize};

use super::{RasterError, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Serialize, Deserialize)]
struct ContourRepr {
    points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    holes: Vec<Vec<Point>>,
}

/// A closed polygon outline with optional holes, validated on construction:
/// every ring has at least three distinct vertices, finite coordinates and no
/// self-intersections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContourRepr", into = "ContourRepr")]
pub struct Contour {
    points: Vec<Point>,
    holes: Vec<Vec<Point>>,
}

impl TryFrom<ContourRepr> for Contour {
    type Error = RasterError;

    fn try_from(r: ContourRepr) -> Result<Self, Self::Error> {
        Contour::with_holes(r.points, r.holes)
    }
}

impl From<Contour> for ContourRepr {
    fn from(c: Contour) -> Self {
        ContourRepr {
            points: c.points,
            holes: c.holes,
        }
    }
}

impl Contour {
    pub fn new(points: Vec<Point>) -> Result<Self, RasterError> {
        Self::with_holes(points, Vec::new())
    }

    pub fn with_holes(points: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self, RasterError> {
        let points = normalize_ring(points)?;
        let holes = holes.into_iter().map(normalize_ring).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { points, holes })
    }

    /// Rectangle outline of a pixel box.
    pub fn from_box(b: super::BoundingBox) -> Self {
        let (x0, y0, x1, y1) = (b.x as f64, b.y as f64, b.right() as f64, b.bottom() as f64);
        Self {
            points: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            holes: Vec::new(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.points.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// `(min_x, min_y, max_x, max_y)` of the outer ring.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    /// Clamps every vertex into the rectangle `(x0, y0)`-`(x1, y1)`. Returns
    /// an error when clamping collapses or tangles a ring.
    pub fn clamped_to(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, RasterError> {
        let clamp = |ring: &[Point]| -> Vec<Point> {
            ring.iter()
                .map(|p| Point::new(p.x.clamp(x0, x1), p.y.clamp(y0, y1)))
                .collect()
        };
        Self::with_holes(clamp(&self.points), self.holes.iter().map(|h| clamp(h)).collect())
    }
}

fn normalize_ring(mut ring: Vec<Point>) -> Result<Vec<Point>, RasterError> {
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(RasterError::DegenerateContour("non-finite coordinate".into()));
    }
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(RasterError::DegenerateContour(format!(
            "ring has {} distinct points, need at least 3",
            ring.len()
        )));
    }
    if signed_area(&ring) == 0.0 {
        return Err(RasterError::DegenerateContour("ring has zero area".into()));
    }
    if let Some((i, j)) = first_self_intersection(&ring) {
        return Err(RasterError::DegenerateContour(format!("edges {i} and {j} intersect")));
    }
    Ok(ring)
}

fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn first_self_intersection(ring: &[Point]) -> Option<(usize, usize)> {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in i + 1..n {
            // Adjacent edges share a vertex by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_touch(a1, a2, b1, b2) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Even-odd fill over pixel centers. Holes are just additional rings, so the
/// even-odd rule excludes them.
pub fn rasterize_contour(c: &Contour, width: u32, height: u32) -> Result<RegionMask, RasterError> {
    let mut mask = RegionMask::new(width, height)?;
    // Edges oriented so `lo` has the smaller y; horizontal edges never cross a
    // scanline and are dropped.
    let mut edges: Vec<(Point, Point)> = Vec::new();
    for ring in c.rings() {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            if a.y == b.y {
                continue;
            }
            edges.push(if a.y < b.y { (a, b) } else { (b, a) });
        }
    }
    let mut xs: Vec<f64> = Vec::new();
    for row in 0..height {
        let cy = row as f64 + 0.5;
        xs.clear();
        for &(lo, hi) in &edges {
            // Half-open in y: the crossing counts when exactly one end is above cy.
            if (lo.y > cy) != (hi.y > cy) {
                xs.push(lo.x + (hi.x - lo.x) * (cy - lo.y) / (hi.y - lo.y));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for span in xs.chunks_exact(2) {
            // Center cx is inside iff span[0] <= cx < span[1].
            let first = (span[0] - 1.0).floor().max(0.0);
            let end = (span[1] + 1.0).ceil().min(width as f64);
            let mut x = first;
            while x < end {
                let cx = x + 0.5;
                if span[0] <= cx && cx < span[1] {
                    mask.set(x as u32, row, true);
                }
                x += 1.0;
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::bbox_of_mask;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    /// Crossing-number point-in-polygon over every ring.
    fn brute_inside(c: &Contour, px: f64, py: f64) -> bool {
        let mut inside = false;
        for ring in c.rings() {
            let n = ring.len();
            let mut j = n - 1;
            for i in 0..n {
                let (pi, pj) = (ring[i], ring[j]);
                if (pi.y > py) != (pj.y > py) {
                    let (lo, hi) = if pi.y < pj.y { (pi, pj) } else { (pj, pi) };
                    let xint = lo.x + (hi.x - lo.x) * (py - lo.y) / (hi.y - lo.y);
                    if px < xint {
                        inside = !inside;
                    }
                }
                j = i;
            }
        }
        inside
    }

    #[test]
    fn square_on_eight_by_eight() {
        let c = Contour::new(pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)])).unwrap();
        let m = rasterize_contour(&c, 8, 8).unwrap();
        assert_eq!(m.count(), 16);
        let mut brute = 0;
        for y in 0..8 {
            for x in 0..8 {
                let inside = brute_inside(&c, x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(m.get(x, y), inside);
                brute += inside as usize;
            }
        }
        assert_eq!(brute, 16);
    }

    #[test]
    fn outside_canvas_is_empty() {
        let c = Contour::new(pts(&[(20.0, 20.0), (30.0, 20.0), (30.0, 30.0)])).unwrap();
        assert!(rasterize_contour(&c, 8, 8).unwrap().is_empty());
    }

    #[test]
    fn two_points_is_degenerate() {
        assert!(matches!(
            Contour::new(pts(&[(0.0, 0.0), (3.0, 3.0)])),
            Err(RasterError::DegenerateContour(_))
        ));
    }

    #[test]
    fn bowtie_is_rejected() {
        assert!(matches!(
            Contour::new(pts(&[(0.0, 0.0), (4.0, 4.0), (4.0, 0.0), (0.0, 4.0)])),
            Err(RasterError::DegenerateContour(_))
        ));
    }

    #[test]
    fn closing_duplicate_is_dropped() {
        let c = Contour::new(pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 0.0)])).unwrap();
        assert_eq!(c.points().len(), 3);
    }

    #[test]
    fn hole_is_excluded() {
        let c = Contour::with_holes(
            pts(&[(0.0, 0.0), (6.0, 0.0), (6.0, 6.0), (0.0, 6.0)]),
            vec![pts(&[(2.0, 2.0), (4.0, 2.0), (4.0, 4.0), (2.0, 4.0)])],
        )
        .unwrap();
        let m = rasterize_contour(&c, 6, 6).unwrap();
        assert_eq!(m.count(), 32);
        assert!(!m.get(2, 2) && !m.get(3, 3));
    }

    #[test]
    fn json_shape_is_point_arrays() {
        let c = Contour::new(pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)])).unwrap();
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(j, r#"{"points":[[0.0,0.0],[2.0,0.0],[2.0,2.0]]}"#);
        let back: Contour = serde_json::from_str(&j).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Contour>(r#"{"points":[[0,0],[1,1]]}"#).is_err());
    }

    fn star_polygon() -> impl Strategy<Value = Contour> {
        (
            3usize..12,
            proptest::collection::vec(0.2f64..1.0, 12),
            proptest::collection::vec(0.0f64..1.0, 12),
            2.0f64..14.0,
            2.0f64..14.0,
            1.0f64..9.0,
        )
            .prop_filter_map("degenerate", |(n, radii, jitter, cx, cy, scale)| {
                let pts: Vec<Point> = (0..n)
                    .map(|i| {
                        let a = (i as f64 + jitter[i] * 0.8) / n as f64 * std::f64::consts::TAU;
                        Point::new(cx + scale * radii[i] * a.cos(), cy + scale * radii[i] * a.sin())
                    })
                    .collect();
                Contour::new(pts).ok()
            })
    }

    proptest! {
        #[test]
        fn raster_matches_point_in_polygon(c in star_polygon()) {
            let m = rasterize_contour(&c, 16, 16).unwrap();
            for y in 0..16 {
                for x in 0..16 {
                    prop_assert_eq!(m.get(x, y), brute_inside(&c, x as f64 + 0.5, y as f64 + 0.5));
                }
            }
        }

        #[test]
        fn raster_bbox_within_contour_bounds(c in star_polygon()) {
            let m = rasterize_contour(&c, 16, 16).unwrap();
            if let Ok(b) = bbox_of_mask(&m) {
                let (x0, y0, x1, y1) = c.bounds();
                prop_assert!(b.x as f64 >= x0.floor());
                prop_assert!(b.y as f64 >= y0.floor());
                prop_assert!(b.right() as f64 <= x1.ceil());
                prop_assert!(b.bottom() as f64 <= y1.ceil());
            }
        }
    }
}
