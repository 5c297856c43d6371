//! Quality measures for an (original map, cartogram) pair.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geo::{detect_adjacencies, Adjacency, Bounds, MapModel, Point, Region};
use crate::raster::scan_spans;

/// Per-region `|o - w| / max(o, w)`, with the mean (ε) and maximum (ξ).
pub fn cartographic_errors(o: &[f64], w: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if o.len() != w.len() {
        return Err(Error::SizeMismatch { expected: w.len(), actual: o.len() });
    }
    if o.is_empty() {
        return Ok((0.0, 0.0, vec![]));
    }
    let mut per = Vec::with_capacity(o.len());
    for (&a, &b) in o.iter().zip(w) {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::InvalidParameter(format!("areas must be positive, got {a} and {b}")));
        }
        per.push((a - b).abs() / a.max(b));
    }
    let eps = per.iter().sum::<f64>() / per.len() as f64;
    let xi = per.iter().copied().fold(0.0, f64::max);
    Ok((eps, xi, per))
}

/// `1 - |E_c ∩ E_m| / |E_c ∪ E_m|`; zero when both sets are empty.
pub fn topology_distortion(e_m: &Adjacency, e_c: &Adjacency) -> f64 {
    let union = e_m.union_len(e_c);
    if union == 0 {
        return 0.0;
    }
    (union - e_m.intersection_len(e_c)) as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeOptions {
    /// Raster side is `2^raster_k` across the larger of the two shapes.
    pub raster_k: u32,
    /// Rescale both shapes to unit area before comparing.
    pub rescale: bool,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions { raster_k: 8, rescale: true }
    }
}

/// Level at and below which the translation search is exhaustive.
pub const EXHAUSTIVE_K: u32 = 6;

/// A binary raster with one `u64` word per 64 columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    /// Global pixel coordinates of column 0 / row 0.
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
    words: usize,
    bits: Vec<u64>,
    pub count: u64,
}

impl Bitmap {
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.words + col / 64] >> (col % 64) & 1 == 1
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words..(r + 1) * self.words]
    }
}

/// Centers every ring on the region centroid and optionally scales to
/// unit area.
fn prepared_rings(region: &Region, rescale: bool) -> Result<Vec<Vec<Point>>> {
    let empty = || Error::EmptyRaster(region.id.clone());
    let c = region.centroid().ok_or_else(empty)?;
    let area = region.area();
    if !(area > 0.0) {
        return Err(empty());
    }
    let f = if rescale { 1.0 / area.sqrt() } else { 1.0 };
    Ok(region.rings().map(|r| r.iter().map(|p| Point::new((p.x - c.x) * f, (p.y - c.y) * f)).collect()).collect())
}

fn extent(rings: &[Vec<Point>]) -> Option<Bounds> {
    Bounds::of(rings.iter().flatten().copied())
}

/// Rasterizes centered rings with pixel size `h`; pixel `g` covers
/// `[g*h, (g+1)*h)` in global coordinates.
pub fn rasterize_rings(rings: &[Vec<Point>], h: f64) -> Option<Bitmap> {
    let b = extent(rings)?;
    let x0 = (b.min.x / h).floor() as i64;
    let y0 = (b.min.y / h).floor() as i64;
    let width = ((b.max.x / h).ceil() as i64 - x0).max(1) as usize;
    let height = ((b.max.y / h).ceil() as i64 - y0).max(1) as usize;
    let local: Vec<Vec<Point>> = rings
        .iter()
        .map(|r| r.iter().map(|p| Point::new(p.x / h - x0 as f64, p.y / h - y0 as f64)).collect())
        .collect();
    let words = width.div_ceil(64);
    let mut bits = vec![0u64; words * height];
    let mut count = 0u64;
    for s in scan_spans(local.iter().map(Vec::as_slice), width, height) {
        let row = &mut bits[s.row as usize * words..(s.row as usize + 1) * words];
        for c in s.start as usize..s.end as usize {
            row[c / 64] |= 1 << (c % 64);
        }
        count += (s.end - s.start) as u64;
    }
    Some(Bitmap { x0, y0, width, height, words, bits, count })
}

/// Bits of `src` moved right by `off` columns and
/// truncated to `dst_words` words.
fn shift_row(src: &[u64], off: i64, dst_words: usize, out: &mut [u64]) {
    out[..dst_words].fill(0);
    for (wi, &w) in src.iter().enumerate() {
        if w == 0 {
            continue;
        }
        let start = wi as i64 * 64 + off;
        let (q, r) = (start.div_euclid(64), start.rem_euclid(64) as u32);
        if q >= 0 && (q as usize) < dst_words {
            out[q as usize] |= w << r;
        }
        if r != 0 && q + 1 >= 0 && ((q + 1) as usize) < dst_words {
            out[(q + 1) as usize] |= w >> (64 - r);
        }
    }
}

/// `|{p : A(p) and B(p - s)}|` for every shift in the given ranges
/// (global pixel units). Returns the best overlap and its shift.
fn best_overlap(a: &Bitmap, b: &Bitmap, sx: std::ops::RangeInclusive<i64>, sy: std::ops::RangeInclusive<i64>) -> (u64, (i64, i64)) {
    let mut best = (0u64, (0i64, 0i64));
    let mut first = true;
    let mut shifted = vec![0u64; a.words * b.height];
    for dx in sx {
        let off = b.x0 + dx - a.x0;
        if off >= a.width as i64 || off + (b.width as i64) <= 0 {
            continue;
        }
        for r in 0..b.height {
            shift_row(b.row(r), off, a.words, &mut shifted[r * a.words..(r + 1) * a.words]);
        }
        for dy in sy.clone() {
            let roff = b.y0 + dy - a.y0;
            let rb_lo = (-roff).max(0) as usize;
            let rb_hi = (a.height as i64 - roff).min(b.height as i64);
            let mut inter = 0u64;
            if (rb_lo as i64) < rb_hi {
                for rb in rb_lo..rb_hi as usize {
                    let ra = (rb as i64 + roff) as usize;
                    let ar = a.row(ra);
                    let br = &shifted[rb * a.words..(rb + 1) * a.words];
                    inter += ar.iter().zip(br).map(|(x, y)| (x & y).count_ones() as u64).sum::<u64>();
                }
            }
            if first || inter > best.0 || (inter == best.0 && (dx.abs() + dy.abs()) < (best.1 .0.abs() + best.1 .1.abs())) {
                best = (inter, (dx, dy));
                first = false;
            }
        }
    }
    best
}

fn normalized_difference(a: u64, b: u64, inter: u64) -> f64 {
    let union = a + b - inter;
    if union == 0 {
        0.0
    } else {
        (a + b - 2 * inter) as f64 / union as f64
    }
}

/// Rasters of both shapes at level `level` sharing pixel size.
pub fn shape_rasters(pm: &Region, pc: &Region, level: u32, rescale: bool) -> Result<(Bitmap, Bitmap)> {
    let rm = prepared_rings(pm, rescale)?;
    let rc = prepared_rings(pc, rescale)?;
    let l = [extent(&rm), extent(&rc)]
        .into_iter()
        .flatten()
        .map(|b| b.width().max(b.height()))
        .fold(0.0, f64::max);
    if !(l > 0.0) {
        return Err(Error::EmptyRaster(pm.id.clone()));
    }
    let h = l / (1u64 << level) as f64;
    let a = rasterize_rings(&rm, h).filter(|b| b.count > 0).ok_or_else(|| Error::EmptyRaster(pm.id.clone()))?;
    let b = rasterize_rings(&rc, h).filter(|b| b.count > 0).ok_or_else(|| Error::EmptyRaster(pc.id.clone()))?;
    Ok((a, b))
}

fn full_range(a: &Bitmap, b: &Bitmap) -> (std::ops::RangeInclusive<i64>, std::ops::RangeInclusive<i64>) {
    // every shift with any possible overlap
    let sx = (a.x0 - b.x0 - b.width as i64 + 1)..=(a.x0 + a.width as i64 - 1 - b.x0);
    let sy = (a.y0 - b.y0 - b.height as i64 + 1)..=(a.y0 + a.height as i64 - 1 - b.y0);
    (sx, sy)
}

/// Normalized symmetric difference `|A △ B| / |A ∪ B|`, minimized over
/// integer pixel translations. Exhaustive up to 64 pixels across, then
/// refined level by level around the coarser optimum.
pub fn shape_distortion(pm: &Region, pc: &Region, opts: &ShapeOptions) -> Result<f64> {
    let coarse = opts.raster_k.min(EXHAUSTIVE_K);
    let (a, b) = shape_rasters(pm, pc, coarse, opts.rescale)?;
    let (sx, sy) = full_range(&a, &b);
    let (mut inter, mut shift) = best_overlap(&a, &b, sx, sy);
    let (mut ca, mut cb) = (a.count, b.count);
    for level in coarse + 1..=opts.raster_k {
        let (a, b) = shape_rasters(pm, pc, level, opts.rescale)?;
        const R: i64 = 2;
        let (x, y) = (shift.0 * 2, shift.1 * 2);
        let found = best_overlap(&a, &b, (x - R)..=(x + R), (y - R)..=(y + R));
        inter = found.0;
        shift = found.1;
        ca = a.count;
        cb = b.count;
    }
    Ok(normalized_difference(ca, cb, inter))
}

/// Mean absolute angular change of all pairwise centroid vectors, over π.
/// Returns the aggregate and each region's mean over its partners.
pub fn relative_position_error(map: &MapModel, carto: &MapModel) -> Result<(f64, Vec<f64>)> {
    let n = map.regions.len();
    if carto.regions.len() != n {
        return Err(Error::SizeMismatch { expected: n, actual: carto.regions.len() });
    }
    if n < 2 {
        return Err(Error::InvalidParameter("relative position error needs at least two regions".into()));
    }
    let cm: Vec<Point> = map.regions.iter().map(|r| r.centroid().unwrap_or_default()).collect();
    let cc: Vec<Point> = carto.regions.iter().map(|r| r.centroid().unwrap_or_default()).collect();
    let mut per = vec![0.0; n];
    let mut total = 0.0;
    let mut degenerate = 0usize;
    for u in 0..n {
        for v in u + 1..n {
            let m = Point::new(cm[v].x - cm[u].x, cm[v].y - cm[u].y);
            let c = Point::new(cc[v].x - cc[u].x, cc[v].y - cc[u].y);
            if (m.x == 0.0 && m.y == 0.0) || (c.x == 0.0 && c.y == 0.0) {
                degenerate += 1;
                continue;
            }
            let ang = (m.x * c.y - m.y * c.x).atan2(m.x * c.x + m.y * c.y).abs();
            total += 2.0 * ang;
            per[u] += ang;
            per[v] += ang;
        }
    }
    if degenerate > 0 {
        log::info!("{degenerate} region pairs with coincident centroids contribute zero angle");
    }
    for p in &mut per {
        *p /= PI * (n - 1) as f64;
    }
    Ok((total / (PI * (n * (n - 1)) as f64), per))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    /// Working texture exponent; adjacency tolerance is half its pixel.
    pub k: u32,
    pub shape: ShapeOptions,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { k: crate::raster::DEFAULT_K, shape: ShapeOptions::default() }
    }
}

impl ReportOptions {
    pub fn adjacency_epsilon(&self) -> f64 {
        0.5 / (1u64 << self.k) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionQuality {
    pub id: String,
    pub name: String,
    pub statistic: f64,
    pub original_area: f64,
    pub area: f64,
    pub target_area: f64,
    pub cartographic_error: f64,
    pub shape_distortion: f64,
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub epsilon: f64,
    pub xi: f64,
    pub tau: f64,
    pub hamming_avg: f64,
    pub hamming_max: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub adjacencies_original: usize,
    pub adjacencies_cartogram: usize,
    pub adjacencies_shared: usize,
    /// Total engine time, when the cartogram came from a run.
    pub millis: Option<f64>,
    pub iterations: Option<usize>,
    pub regions: Vec<RegionQuality>,
}

/// All six measures for `carto` against `map`. `weights` are the
/// statistics the cartogram should represent.
pub fn full_report(map: &MapModel, carto: &MapModel, weights: &[f64], opts: &ReportOptions, exec: Exec) -> Result<QualityReport> {
    let n = map.regions.len();
    if carto.regions.len() != n || weights.len() != n {
        return Err(Error::SizeMismatch { expected: n, actual: carto.regions.len().min(weights.len()) });
    }
    for (a, b) in map.regions.iter().zip(&carto.regions) {
        if a.id != b.id {
            return Err(Error::UnknownRegion(b.id.clone()));
        }
    }
    let o: Vec<f64> = carto.regions.iter().map(Region::area).collect();
    let total_area: f64 = o.iter().sum();
    let total_weight: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|s| s / total_weight * total_area).collect();
    let (epsilon, xi, per_err) = cartographic_errors(&o, &w)?;

    let eps = opts.adjacency_epsilon();
    let (e_m, e_c) = exec.join(|| detect_adjacencies(map, eps), || detect_adjacencies(carto, eps));
    let tau = topology_distortion(&e_m, &e_c);

    let pairs: Vec<(&Region, &Region)> = map.regions.iter().zip(&carto.regions).collect();
    let shapes: Vec<Result<f64>> = exec.map_slice(&pairs, |(a, b)| shape_distortion(a, b, &opts.shape));
    let shapes: Vec<f64> = shapes.into_iter().collect::<Result<_>>()?;
    let hamming_avg = if n == 0 { 0.0 } else { shapes.iter().sum::<f64>() / n as f64 };
    let hamming_max = shapes.iter().copied().fold(0.0, f64::max);

    let (r, per_pos) = if n >= 2 { relative_position_error(map, carto)? } else { (0.0, vec![0.0; n]) };

    let regions = (0..n)
        .map(|i| RegionQuality {
            id: carto.regions[i].id.clone(),
            name: carto.regions[i].name.clone(),
            statistic: weights[i],
            original_area: map.regions[i].area(),
            area: o[i],
            target_area: w[i],
            cartographic_error: per_err[i],
            shape_distortion: shapes[i],
            position_error: per_pos[i],
        })
        .collect();
    Ok(QualityReport {
        epsilon,
        xi,
        tau,
        hamming_avg,
        hamming_max,
        r,
        adjacencies_original: e_m.len(),
        adjacencies_cartogram: e_c.len(),
        adjacencies_shared: e_m.intersection_len(&e_c),
        millis: None,
        iterations: None,
        regions,
    })
}

impl QualityReport {
    /// One CSV row per region.
    pub fn write_regions_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.regions {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
