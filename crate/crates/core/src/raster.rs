//! Region labels and the piecewise-constant density texture.
//!
//! A pixel `(i, j)` belongs to a region when its center
//! `((i + 0.5) / n, (j + 0.5) / n)` lies inside the region's rings under
//! the even-odd rule. Crossings use half-open intervals on both axes, and
//! each edge is evaluated from a canonical endpoint order, so two regions
//! sharing an edge split the pixels on it without gaps or double counts.
//! Where regions genuinely overlap, the lower region index wins.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geo::{MapModel, Point, Ring};

pub const BACKGROUND: u32 = u32::MAX;
pub const MIN_K: u32 = 4;
pub const MAX_K: u32 = 13;
pub const DEFAULT_K: u32 = 10;

/// A run of pixels `[start, end)` on one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub row: u32,
    pub start: u32,
    pub end: u32,
}

/// Scanline spans for a set of rings already expressed in pixel units
/// (pixel `i` covers `[i, i + 1)`, center at `i + 0.5`).
pub fn scan_spans<'a, I>(rings: I, cols: usize, rows: usize) -> Vec<Span>
where
    I: IntoIterator<Item = &'a [Point]>,
{
    let mut crossings: Vec<(u32, f64)> = Vec::new();
    for ring in rings {
        let n = ring.len();
        for e in 0..n {
            let (p, q) = (ring[e], ring[(e + 1) % n]);
            if p.y == q.y {
                continue;
            }
            let (a, b) = if p.y < q.y { (p, q) } else { (q, p) };
            // rows whose center y = j + 0.5 satisfies a.y <= y < b.y
            let j0 = (a.y - 0.5).ceil().max(0.0);
            let j1 = (b.y - 0.5).ceil().min(rows as f64);
            if j0 >= j1 {
                continue;
            }
            let slope = (b.x - a.x) / (b.y - a.y);
            for j in j0 as usize..j1 as usize {
                let yc = j as f64 + 0.5;
                crossings.push((j as u32, a.x + (yc - a.y) * slope));
            }
        }
    }
    crossings.sort_unstable_by(|l, r| l.0.cmp(&r.0).then(l.1.total_cmp(&r.1)));

    let mut spans = Vec::new();
    let mut k = 0;
    while k < crossings.len() {
        let row = crossings[k].0;
        let mut end = k;
        while end < crossings.len() && crossings[end].0 == row {
            end += 1;
        }
        let mut c = k;
        while c + 1 < end {
            let (x0, x1) = (crossings[c].1, crossings[c + 1].1);
            // centers i + 0.5 in [x0, x1)
            let i0 = (x0 - 0.5).ceil().max(0.0);
            let i1 = (x1 - 0.5).ceil().min(cols as f64);
            if i0 < i1 {
                spans.push(Span { row, start: i0 as u32, end: i1 as u32 });
            }
            c += 2;
        }
        k = end;
    }
    spans
}

fn region_spans(rings: &[&Ring], n: usize) -> Vec<Span> {
    let scale = n as f64;
    let scaled: Vec<Vec<Point>> = rings
        .iter()
        .map(|r| r.iter().map(|p| Point::new(p.x * scale, p.y * scale)).collect())
        .collect();
    scan_spans(scaled.iter().map(Vec::as_slice), n, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelTexture {
    pub k: u32,
    pub size: usize,
    /// Row-major; `BACKGROUND` marks pixels outside every region.
    pub labels: Vec<u32>,
    pub pixel_counts: Vec<u64>,
    pub background_count: u64,
}

impl LabelTexture {
    pub fn map_pixels(&self) -> u64 {
        self.pixel_counts.iter().sum()
    }

    pub fn total_pixels(&self) -> u64 {
        (self.size * self.size) as u64
    }

    /// Ids of regions with no pixels.
    pub fn empty_regions(&self, map: &MapModel) -> Vec<String> {
        self.pixel_counts
            .iter()
            .zip(&map.regions)
            .filter(|(c, _)| **c == 0)
            .map(|(_, r)| r.id.clone())
            .collect()
    }
}

pub fn check_k(k: u32) -> Result<usize> {
    if !(MIN_K..=MAX_K).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "texture exponent k must lie in [{MIN_K}, {MAX_K}], got {k}"
        )));
    }
    Ok(1usize << k)
}

/// Labels every pixel, without failing on empty regions.
pub fn label_pixels(map: &MapModel, k: u32, exec: Exec) -> Result<LabelTexture> {
    label_pixels_with(map, k, exec, Vec::new())
}

/// [`label_pixels`] writing into a recycled buffer.
pub fn label_pixels_with(map: &MapModel, k: u32, exec: Exec, mut labels: Vec<u32>) -> Result<LabelTexture> {
    let n = check_k(k)?;
    let spans: Vec<Vec<Span>> = exec.map_slice(&map.regions, |region| {
        let rings: Vec<&Ring> = region.rings().collect();
        region_spans(&rings, n)
    });
    labels.clear();
    labels.resize(n * n, BACKGROUND);
    // highest index first so lower indices overwrite on overlap
    for (r, region_spans) in spans.iter().enumerate().rev() {
        for s in region_spans {
            let base = s.row as usize * n;
            labels[base + s.start as usize..base + s.end as usize].fill(r as u32);
        }
    }
    let mut pixel_counts = vec![0u64; map.regions.len()];
    let mut background_count = 0u64;
    for &l in &labels {
        if l == BACKGROUND {
            background_count += 1;
        } else {
            pixel_counts[l as usize] += 1;
        }
    }
    Ok(LabelTexture { k, size: n, labels, pixel_counts, background_count })
}

/// Labels every pixel; a region without pixels is an error since its
/// statistic would silently vanish from the density.
pub fn rasterize_labels(map: &MapModel, k: u32, exec: Exec) -> Result<LabelTexture> {
    let labels = label_pixels(map, k, exec)?;
    let empty = labels.empty_regions(map);
    if !empty.is_empty() {
        return Err(Error::ZeroPixelRegion(empty));
    }
    Ok(labels)
}

/// Mean density over map pixels: total statistic / map pixel count.
pub fn default_bdv(map: &MapModel, labels: &LabelTexture) -> f64 {
    map.total_statistic() / labels.map_pixels() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityTexture {
    pub size: usize,
    pub d: Vec<f64>,
    /// Mean density over the whole domain, `C / m`.
    pub d0: f64,
    pub bdv: f64,
    pub pixel_counts: Vec<u64>,
}

impl DensityTexture {
    pub fn total(&self) -> f64 {
        self.d0 * (self.size * self.size) as f64
    }

    /// Uniform texture; used for the precomputed identity-density map.
    pub fn constant(size: usize, value: f64) -> Self {
        DensityTexture { size, d: vec![value; size * size], d0: value, bdv: value, pixel_counts: vec![] }
    }

    pub fn from_values(size: usize, d: Vec<f64>) -> Self {
        assert_eq!(d.len(), size * size, "texture must be square");
        let total: f64 = d.iter().sum();
        DensityTexture { size, d, d0: total / (size * size) as f64, bdv: 0.0, pixel_counts: vec![] }
    }
}

/// Region pixels get `s(v) / o_px(v)`, background pixels get `bdv`.
pub fn build_density(map: &MapModel, labels: &LabelTexture, bdv: f64, exec: Exec) -> Result<DensityTexture> {
    build_density_with(map, labels, bdv, exec, Vec::new())
}

/// [`build_density`] writing into a recycled buffer.
pub fn build_density_with(map: &MapModel, labels: &LabelTexture, bdv: f64, exec: Exec, mut d: Vec<f64>) -> Result<DensityTexture> {
    if !(bdv > 0.0) || !bdv.is_finite() {
        return Err(Error::InvalidParameter(format!("background density must be positive, got {bdv}")));
    }
    let per_region: Vec<f64> = map
        .regions
        .iter()
        .zip(&labels.pixel_counts)
        .map(|(r, &c)| if c == 0 { 0.0 } else { r.statistic / c as f64 })
        .collect();
    let n = labels.size;
    d.resize(n * n, 0.0);
    exec.for_each_row(&mut d, n, |j, row| {
        let src = &labels.labels[j * n..(j + 1) * n];
        for (out, &l) in row.iter_mut().zip(src) {
            *out = if l == BACKGROUND { bdv } else { per_region[l as usize] };
        }
    });
    let total = map.total_statistic() + bdv * labels.background_count as f64;
    Ok(DensityTexture {
        size: n,
        d,
        d0: total / (n * n) as f64,
        bdv,
        pixel_counts: labels.pixel_counts.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Polygon, Region};

    fn rect_region(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, s: f64) -> Region {
        Region {
            id: id.into(),
            name: id.into(),
            polygons: vec![Polygon {
                exterior: vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)],
                holes: vec![],
            }],
            statistic: s,
        }
    }

    #[test]
    fn full_domain_square() {
        let m = MapModel::new(vec![rect_region("a", 0.0, 0.0, 1.0, 1.0, 1.0)]);
        let l = rasterize_labels(&m, 4, Exec::default()).unwrap();
        assert_eq!(l.pixel_counts, vec![256]);
        assert_eq!(l.background_count, 0);
    }

    #[test]
    fn left_half_plane() {
        let m = MapModel::new(vec![rect_region("a", 0.0, 0.0, 0.5, 1.0, 1.0)]);
        let l = rasterize_labels(&m, 4, Exec::default()).unwrap();
        assert_eq!(l.pixel_counts, vec![128]);
        assert!(l.labels[7] == 0 && l.labels[8] == BACKGROUND);
    }

    #[test]
    fn sub_pixel_region_is_error() {
        let m = MapModel::new(vec![
            rect_region("big", 0.0, 0.0, 0.5, 1.0, 1.0),
            rect_region("tiny", 0.70, 0.70, 0.71, 0.71, 1.0),
        ]);
        match rasterize_labels(&m, 4, Exec::default()) {
            Err(Error::ZeroPixelRegion(ids)) => assert_eq!(ids, vec!["tiny".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k_out_of_range() {
        let m = MapModel::new(vec![rect_region("a", 0.0, 0.0, 1.0, 1.0, 1.0)]);
        assert!(rasterize_labels(&m, 3, Exec::default()).is_err());
        assert!(rasterize_labels(&m, 14, Exec::default()).is_err());
    }

    #[test]
    fn shared_edge_through_centers_partitions_exactly() {
        // x = 0.53125 is exactly a pixel center at k = 4
        let x = 8.5 / 16.0;
        let m = MapModel::new(vec![
            rect_region("a", 0.1, 0.1, x, 0.9, 1.0),
            rect_region("b", x, 0.1, 0.9, 0.9, 1.0),
        ]);
        let l = rasterize_labels(&m, 4, Exec::default()).unwrap();
        let union = MapModel::new(vec![rect_region("u", 0.1, 0.1, 0.9, 0.9, 1.0)]);
        let lu = rasterize_labels(&union, 4, Exec::default()).unwrap();
        assert_eq!(l.map_pixels(), lu.map_pixels());
        // center exactly on the edge goes to the region on its right
        assert_eq!(l.labels[5 * 16 + 8], 1);
    }

    #[test]
    fn hole_is_background() {
        let mut r = rect_region("a", 0.0, 0.0, 1.0, 1.0, 1.0);
        r.polygons[0].holes.push(vec![
            Point::new(0.25, 0.25),
            Point::new(0.25, 0.75),
            Point::new(0.75, 0.75),
            Point::new(0.75, 0.25),
        ]);
        let l = rasterize_labels(&MapModel::new(vec![r]), 4, Exec::default()).unwrap();
        assert_eq!(l.background_count, 64);
    }

    #[test]
    fn bdv_examples() {
        // one region of s = 100 on 50 of 64 pixels
        let mut labels = LabelTexture {
            k: 3,
            size: 8,
            labels: vec![BACKGROUND; 64],
            pixel_counts: vec![50],
            background_count: 14,
        };
        labels.labels[..50].fill(0);
        let m = MapModel::new(vec![rect_region("a", 0.0, 0.0, 1.0, 1.0, 100.0)]);
        assert_eq!(default_bdv(&m, &labels), 2.0);
        let d = build_density(&m, &labels, 2.0, Exec::default()).unwrap();
        assert!((d.d0 - 2.0).abs() < 1e-12);
        let scaled = MapModel::new(vec![rect_region("a", 0.0, 0.0, 1.0, 1.0, 300.0)]);
        assert_eq!(default_bdv(&scaled, &labels), 6.0);
    }

    #[test]
    fn density_values_and_mass() {
        let m = MapModel::new(vec![
            rect_region("a", 0.0, 0.0, 0.25, 0.25, 8.0),
            rect_region("b", 0.5, 0.5, 1.0, 1.0, 30.0),
        ]);
        let l = rasterize_labels(&m, 4, Exec::default()).unwrap();
        assert_eq!(l.pixel_counts, vec![16, 64]);
        let bdv = default_bdv(&m, &l);
        let d = build_density(&m, &l, bdv, Exec::default()).unwrap();
        assert_eq!(d.d[0], 0.5);
        let sum: f64 = d.d.iter().sum();
        assert!((sum - (38.0 + bdv * l.background_count as f64)).abs() < 1e-9 * sum);
        assert!((d.d0 - bdv).abs() < 1e-12 * bdv);
        let d105 = build_density(&m, &l, 1.05 * bdv, Exec::default()).unwrap();
        assert_eq!(d105.d[15], 1.05 * bdv);
        assert!(build_density(&m, &l, 0.0, Exec::default()).is_err());
    }

    #[test]
    fn proportional_statistics_give_uniform_texture() {
        let m = MapModel::new(vec![
            rect_region("a", 0.0, 0.0, 0.25, 1.0, 10.0),
            rect_region("b", 0.25, 0.0, 1.0, 1.0, 30.0),
        ]);
        let l = rasterize_labels(&m, 4, Exec::default()).unwrap();
        let bdv = default_bdv(&m, &l);
        let d = build_density(&m, &l, bdv, Exec::default()).unwrap();
        assert!(d.d.iter().all(|&v| (v - d.d[0]).abs() < 1e-12));
    }
}
