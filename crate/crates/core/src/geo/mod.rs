//! Polygonal map model: regions, rings, adjacency, normalization into the
//! unit texture square.
//!
//! Coordinates are stored with the y axis pointing down. Exterior rings
//! have positive signed shoelace area, holes negative, so summing the
//! signed ring areas of a region gives its area directly.

mod adjacency;
mod parse;
mod stats;
mod validate;

pub use adjacency::{detect_adjacencies, Adjacency};
pub use parse::{parse_map, to_geojson, write_geojson, CoordinateFrame, ParseOptions};
pub use stats::{attach_statistics, AttachedStatistics, StatsOptions};
pub use validate::validate_ring;
pub use geojson::JsonObject;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Closed ring stored without the repeated closing vertex.
pub type Ring = Vec<Point>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    #[serde(default)]
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn rings_mut(&mut self) -> impl Iterator<Item = &mut Ring> {
        std::iter::once(&mut self.exterior).chain(self.holes.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub name: String,
    pub polygons: Vec<Polygon>,
    pub statistic: f64,
}

impl Region {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons.iter().flat_map(|p| p.rings())
    }

    pub fn rings_mut(&mut self) -> impl Iterator<Item = &mut Ring> {
        self.polygons.iter_mut().flat_map(|p| p.rings_mut())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(Vec::len).sum()
    }

    /// Signed-ring sum of shoelace areas; holes subtract.
    pub fn area(&self) -> f64 {
        self.rings().map(|r| shoelace_area(r)).sum()
    }

    /// Area-weighted centroid over all rings. `None` for zero total area.
    pub fn centroid(&self) -> Option<Point> {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for ring in self.rings() {
            let (ra, rx, ry) = ring_moments(ring);
            a += ra;
            cx += rx;
            cy += ry;
        }
        if a.abs() < f64::MIN_POSITIVE {
            None
        } else {
            Some(Point::new(cx / (3.0 * a), cy / (3.0 * a)))
        }
    }

    pub fn bounds(&self) -> Option<Bounds> {
        Bounds::of(self.rings().flatten().copied())
    }
}

/// Isotropic scale followed by translation: `p' = p * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub offset: Point,
    pub scaling_fraction: f64,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            scale: 1.0,
            offset: Point::default(),
            scaling_fraction: 1.0,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(p.x * self.scale + self.offset.x, p.y * self.scale + self.offset.y)
    }

    pub fn invert(&self, p: Point) -> Point {
        Point::new((p.x - self.offset.x) / self.scale, (p.y - self.offset.y) / self.scale)
    }

    /// `other` applied after `self`.
    fn then(&self, other: &NormalizationTransform) -> NormalizationTransform {
        NormalizationTransform {
            scale: self.scale * other.scale,
            offset: other.apply(self.offset),
            scaling_fraction: other.scaling_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn of(points: impl IntoIterator<Item = Point>) -> Option<Bounds> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Bounds { min: first, max: first };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapModel {
    pub regions: Vec<Region>,
    pub adjacency: Adjacency,
    pub normalization: NormalizationTransform,
}

impl MapModel {
    pub fn new(regions: Vec<Region>) -> Self {
        MapModel {
            regions,
            adjacency: Adjacency::default(),
            normalization: NormalizationTransform::identity(),
        }
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.statistic).collect()
    }

    pub fn total_statistic(&self) -> f64 {
        self.regions.iter().map(|r| r.statistic).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.regions.iter().map(Region::vertex_count).sum()
    }

    pub fn bounds(&self) -> Option<Bounds> {
        Bounds::of(self.regions.iter().flat_map(|r| r.rings().flatten().copied()))
    }

    /// Replaces statistics in region order. Values must be positive.
    pub fn with_statistics(&self, values: &[f64]) -> Result<MapModel> {
        if values.len() != self.regions.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} statistics, got {}",
                self.regions.len(),
                values.len()
            )));
        }
        let mut out = self.clone();
        for (region, &v) in out.regions.iter_mut().zip(values) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveStatistic { id: region.id.clone(), value: v });
            }
            region.statistic = v;
        }
        Ok(out)
    }

    /// Flat list of every vertex, in region/polygon/ring order.
    pub fn vertices(&self) -> Vec<Point> {
        self.regions
            .iter()
            .flat_map(|r| r.rings().flatten().copied())
            .collect()
    }

    /// Inverse of [`MapModel::vertices`]: overwrites vertex positions in the
    /// same traversal order.
    pub fn set_vertices(&mut self, vertices: &[Point]) -> Result<()> {
        let n = self.vertex_count();
        if n != vertices.len() {
            return Err(Error::VertexCountMismatch { a: n, b: vertices.len() });
        }
        let mut it = vertices.iter();
        for region in &mut self.regions {
            for ring in region.rings_mut() {
                for p in ring.iter_mut() {
                    *p = *it.next().expect("length checked");
                }
            }
        }
        Ok(())
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> MapModel {
        let mut out = self.clone();
        for region in &mut out.regions {
            for ring in region.rings_mut() {
                for p in ring.iter_mut() {
                    *p = f(*p);
                }
            }
        }
        out
    }
}

/// Signed shoelace area. Positive for counter-clockwise rings in a y-up
/// frame (equivalently clockwise as drawn on a y-down screen).
pub fn shoelace_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// (signed area, Σ (x_i + x_{i+1}) c_i, Σ (y_i + y_{i+1}) c_i) / 2
fn ring_moments(ring: &[Point]) -> (f64, f64, f64) {
    let n = ring.len();
    if n < 3 {
        return (0.0, 0.0, 0.0);
    }
    // Shift to the first vertex so centroids of small rings far from the
    // origin keep their precision.
    let o = ring[0];
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let (px, py, qx, qy) = (p.x - o.x, p.y - o.y, q.x - o.x, q.y - o.y);
        let c = px * qy - qx * py;
        a += c;
        cx += (px + qx) * c;
        cy += (py + qy) * c;
    }
    let a = 0.5 * a;
    let cx = 0.5 * cx;
    let cy = 0.5 * cy;
    (a, cx + 3.0 * a * o.x, cy + 3.0 * a * o.y)
}

/// Isotropically scales and centers the map so its larger bounding-box
/// side spans `[0.5 - s/2, 0.5 + s/2]`.
pub fn normalize(map: &MapModel, s: f64) -> Result<MapModel> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scaling fraction must lie in (0, 1), got {s}"
        )));
    }
    let b = map.bounds().ok_or(Error::DegenerateBounds)?;
    let extent = b.width().max(b.height());
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::DegenerateBounds);
    }
    let scale = s / extent;
    let cx = 0.5 * (b.min.x + b.max.x);
    let cy = 0.5 * (b.min.y + b.max.y);
    let step = NormalizationTransform {
        scale,
        offset: Point::new(0.5 - cx * scale, 0.5 - cy * scale),
        scaling_fraction: s,
    };
    let mut out = map.map_points(|p| step.apply(p));
    out.normalization = map.normalization.then(&step);
    Ok(out)
}

/// Splits every edge longer than `max_len` into equal pieces.
///
/// Insertion points depend only on the unordered endpoint pair, so an edge
/// shared by two regions (traversed in opposite directions) receives
/// bit-identical vertices on both sides.
pub fn densify(map: &MapModel, max_len: f64) -> MapModel {
    assert!(max_len > 0.0, "max edge length must be positive");
    let mut out = map.clone();
    for region in &mut out.regions {
        for ring in region.rings_mut() {
            *ring = densify_ring(ring, max_len);
        }
    }
    out
}

fn densify_ring(ring: &[Point], max_len: f64) -> Ring {
    let n = ring.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        out.push(p);
        let len = p.dist(q);
        if len <= max_len {
            continue;
        }
        let pieces = (len / max_len).ceil() as usize;
        let forward = (p.x, p.y) <= (q.x, q.y);
        let (a, b) = if forward { (p, q) } else { (q, p) };
        let inserted = (1..pieces).map(|k| a.lerp(b, k as f64 / pieces as f64));
        if forward {
            out.extend(inserted);
        } else {
            let mut tmp: Vec<Point> = inserted.collect();
            tmp.reverse();
            out.extend(tmp);
        }
    }
    out
}
