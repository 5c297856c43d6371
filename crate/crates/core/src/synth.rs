//! Deterministic synthetic maps and statistics for fixtures, benchmarks
//! and tests.
//!
//! Maps are built on a square cell lattice: a blob-shaped mask is split
//! into weighted Voronoi regions, cleaned until every region is one
//! 4-connected piece with no diagonal-only contacts, traced into rings
//! along cell borders, and finally bent by a smooth warp of the lattice
//! vertices. Neighboring regions therefore share bit-identical boundary
//! vertices.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::geo::{shoelace_area, MapModel, Point, Polygon, Region};

const BG: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapStyle {
    pub name: String,
    pub id_prefix: String,
    pub regions: usize,
    /// Lattice cells along the longer side.
    pub grid: usize,
    /// Height / width of the mainland bounding box.
    pub aspect: f64,
    /// Amplitude of the outline's low-frequency wobble.
    pub roughness: f64,
    /// Log-standard deviation of statistic density across regions.
    pub sigma: f64,
    /// Separate single-region islands.
    pub islands: usize,
    /// Give one mainland region an extra island part.
    pub multipart: bool,
    pub seed: u64,
}

impl MapStyle {
    fn new(name: &str, prefix: &str, regions: usize, aspect: f64, sigma: f64, seed: u64) -> Self {
        MapStyle {
            name: name.into(),
            id_prefix: prefix.into(),
            regions,
            grid: 96,
            aspect,
            roughness: 0.12,
            sigma,
            islands: 0,
            multipart: false,
            seed,
        }
    }

    pub fn france() -> Self {
        MapStyle::new("france", "FR", 13, 0.95, 0.6, 11)
    }

    pub fn germany() -> Self {
        MapStyle::new("germany", "DE", 16, 1.3, 0.6, 12)
    }

    pub fn netherlands() -> Self {
        MapStyle { roughness: 0.18, ..MapStyle::new("netherlands", "NL", 12, 1.15, 0.5, 13) }
    }

    pub fn usa() -> Self {
        MapStyle { grid: 128, ..MapStyle::new("usa", "US", 49, 0.55, 0.7, 14) }
    }

    pub fn europe() -> Self {
        MapStyle { grid: 128, islands: 3, multipart: true, roughness: 0.2, ..MapStyle::new("europe", "EU", 35, 0.9, 0.9, 15) }
    }

    /// Small eight-region map for parameter sweeps.
    pub fn octet() -> Self {
        MapStyle { grid: 64, ..MapStyle::new("octet", "OC", 8, 0.8, 0.4, 16) }
    }

    pub fn bundled() -> Vec<MapStyle> {
        vec![Self::france(), Self::germany(), Self::netherlands(), Self::usa(), Self::europe(), Self::octet()]
    }
}

/// Lattice of labels padded by one background cell on every side.
struct Grid {
    w: usize,
    h: usize,
    cells: Vec<u32>,
}

impl Grid {
    fn get(&self, x: isize, y: isize) -> u32 {
        if x < 0 || y < 0 || x as usize >= self.w || y as usize >= self.h {
            BG
        } else {
            self.cells[y as usize * self.w + x as usize]
        }
    }

    fn set(&mut self, x: usize, y: usize, v: u32) {
        self.cells[y * self.w + x] = v;
    }
}

fn blob_mask(g: &mut Grid, cx: f64, cy: f64, rx: f64, ry: f64, roughness: f64, rng: &mut ChaCha8Rng, label: u32) {
    let harmonics: Vec<(f64, f64, f64)> = (2..6)
        .map(|k| (k as f64, roughness * rng.gen_range(0.3..1.0) / k as f64 * 2.0, rng.gen_range(0.0..2.0 * PI)))
        .collect();
    for y in 1..g.h - 1 {
        for x in 1..g.w - 1 {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            let r = dx.hypot(dy);
            let th = dy.atan2(dx);
            let bound = 1.0 + harmonics.iter().map(|&(k, a, ph)| a * (k * th + ph).cos()).sum::<f64>();
            if r < bound {
                g.set(x, y, label);
            }
        }
    }
}

/// Weighted nearest-seed assignment of every cell carrying `mask`.
fn voronoi(g: &mut Grid, mask: u32, first: u32, count: usize, rng: &mut ChaCha8Rng) {
    let cells: Vec<(usize, usize)> =
        (0..g.h).flat_map(|y| (0..g.w).map(move |x| (x, y))).filter(|&(x, y)| g.cells[y * g.w + x] == mask).collect();
    assert!(cells.len() >= count * 4, "mask too small for {count} regions");
    let mut seeds: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let (x, y) = cells[rng.gen_range(0..cells.len())];
            (x as f64 + 0.5, y as f64 + 0.5)
        })
        .collect();
    // Lloyd relaxation spreads the seeds out
    for _ in 0..8 {
        let mut acc = vec![(0.0, 0.0, 0usize); count];
        for &(x, y) in &cells {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let best = nearest(&seeds, None, p);
            acc[best].0 += p.0;
            acc[best].1 += p.1;
            acc[best].2 += 1;
        }
        for (s, a) in seeds.iter_mut().zip(&acc) {
            if a.2 > 0 {
                *s = (a.0 / a.2 as f64, a.1 / a.2 as f64);
            }
        }
    }
    let weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.85..1.15)).collect();
    for &(x, y) in &cells {
        let best = nearest(&seeds, Some(&weights), (x as f64 + 0.5, y as f64 + 0.5));
        g.set(x, y, first + best as u32);
    }
}

fn nearest(seeds: &[(f64, f64)], weights: Option<&[f64]>, p: (f64, f64)) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, s) in seeds.iter().enumerate() {
        let d = (s.0 - p.0).hypot(s.1 - p.1) * weights.map_or(1.0, |w| w[i]);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

const UNSET: u32 = u32::MAX - 1;

/// Keeps only the largest 4-connected component of every region label.
/// Returns whether anything changed.
fn keep_largest_components(g: &mut Grid, labels: u32) -> bool {
    let mut comp = vec![usize::MAX; g.cells.len()];
    let mut best: HashMap<u32, (usize, usize)> = HashMap::new();
    let mut sizes = Vec::new();
    for start in 0..g.cells.len() {
        let l = g.cells[start];
        if l >= labels || comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        comp[start] = id;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = ((p % g.w) as isize, (p / g.w) as isize);
            for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if g.get(nx, ny) == l {
                    let q = ny as usize * g.w + nx as usize;
                    if comp[q] == usize::MAX {
                        comp[q] = id;
                        queue.push_back(q);
                    }
                }
            }
        }
        sizes.push(size);
        let e = best.entry(l).or_insert((id, 0));
        if size > e.1 {
            *e = (id, size);
        }
    }
    let mut changed = false;
    for p in 0..g.cells.len() {
        let l = g.cells[p];
        if l < labels && best[&l].0 != comp[p] {
            g.cells[p] = UNSET;
            changed = true;
        }
    }
    changed
}

/// Gives every unset cell the most common labeled 4-neighbor, repeatedly.
fn fill_unset(g: &mut Grid, labels: u32) {
    loop {
        let mut updates = Vec::new();
        for y in 0..g.h {
            for x in 0..g.w {
                if g.cells[y * g.w + x] != UNSET {
                    continue;
                }
                let mut counts: Vec<(u32, usize)> = Vec::new();
                let (xi, yi) = (x as isize, y as isize);
                for l in [g.get(xi + 1, yi), g.get(xi - 1, yi), g.get(xi, yi + 1), g.get(xi, yi - 1)] {
                    if l < labels {
                        match counts.iter_mut().find(|c| c.0 == l) {
                            Some(c) => c.1 += 1,
                            None => counts.push((l, 1)),
                        }
                    }
                }
                if let Some(&(l, _)) = counts.iter().max_by_key(|c| (c.1, std::cmp::Reverse(c.0))) {
                    updates.push((x, y, l));
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (x, y, l) in updates {
            g.set(x, y, l);
        }
    }
    for c in &mut g.cells {
        if *c == UNSET {
            *c = BG;
        }
    }
}

/// Removes every 2×2 block whose diagonal cells match while the other
/// diagonal differs from them, which would pinch a boundary at a vertex.
fn remove_pinches(g: &mut Grid) -> bool {
    let mut changed = false;
    loop {
        let mut any = false;
        for y in 0..g.h - 1 {
            for x in 0..g.w - 1 {
                let (a, b) = (g.cells[y * g.w + x], g.cells[y * g.w + x + 1]);
                let (c, d) = (g.cells[(y + 1) * g.w + x], g.cells[(y + 1) * g.w + x + 1]);
                if a == d && a != BG && b != a && c != a {
                    // grow the diagonal pair through the non-background side
                    if b == BG || c != BG {
                        g.set(x + 1, y, a);
                    } else {
                        g.set(x, y + 1, a);
                    }
                    any = true;
                } else if b == c && b != BG && a != b && d != b {
                    if a == BG || d != BG {
                        g.set(x, y, b);
                    } else {
                        g.set(x + 1, y + 1, b);
                    }
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        changed = true;
    }
    changed
}

fn clean(g: &mut Grid, labels: u32) {
    for _ in 0..64 {
        let a = keep_largest_components(g, labels);
        fill_unset(g, labels);
        let b = remove_pinches(g);
        if !a && !b {
            return;
        }
    }
    panic!("lattice cleanup did not settle");
}

/// Directed cell-border loops of one label, region on the right in
/// y-down coordinates (positive shoelace for outer rings).
fn trace(g: &Grid, label: u32) -> Vec<Vec<(i64, i64)>> {
    let mut next: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    for y in 0..g.h as isize {
        for x in 0..g.w as isize {
            if g.get(x, y) != label {
                continue;
            }
            let (px, py) = (x as i64, y as i64);
            let mut edge = |a: (i64, i64), b: (i64, i64)| {
                let prev = next.insert(a, b);
                assert!(prev.is_none(), "pinched boundary at {a:?}");
            };
            if g.get(x, y - 1) != label {
                edge((px, py), (px + 1, py));
            }
            if g.get(x + 1, y) != label {
                edge((px + 1, py), (px + 1, py + 1));
            }
            if g.get(x, y + 1) != label {
                edge((px + 1, py + 1), (px, py + 1));
            }
            if g.get(x - 1, y) != label {
                edge((px, py + 1), (px, py));
            }
        }
    }
    let mut loops = Vec::new();
    let mut starts: Vec<(i64, i64)> = next.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        if !next.contains_key(&s) {
            continue;
        }
        let mut ring = vec![s];
        let mut cur = next.remove(&s).expect("start edge");
        while cur != s {
            ring.push(cur);
            cur = next.remove(&cur).expect("closed boundary");
        }
        loops.push(ring);
    }
    loops
}

struct Warp {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl Warp {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        // amplitude * 2π / wavelength stays well below 1, so the warp is a diffeomorphism
        let terms = (0..6)
            .map(|_| {
                let wl = rng.gen_range(10.0..24.0);
                (0.28 * wl / 24.0, 2.0 * PI / wl, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        Warp { terms }
    }

    fn apply(&self, (x, y): (i64, i64)) -> Point {
        let (xf, yf) = (x as f64, y as f64);
        let mut dx = 0.0;
        let mut dy = 0.0;
        for (i, &(a, f, p1, p2)) in self.terms.iter().enumerate() {
            if i % 2 == 0 {
                dx += a * (f * yf + p1).sin() * (0.5 * f * xf + p2).cos();
            } else {
                dy += a * (f * xf + p1).sin() * (0.5 * f * yf + p2).cos();
            }
        }
        Point::new(xf + dx, yf + dy)
    }
}

fn point_in_ring(p: Point, ring: &[Point]) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    inside
}

fn polygons_from_loops(loops: Vec<Vec<Point>>) -> Vec<Polygon> {
    let (outer, holes): (Vec<_>, Vec<_>) = loops.into_iter().partition(|r| shoelace_area(r) > 0.0);
    let mut polys: Vec<Polygon> = outer.into_iter().map(|exterior| Polygon { exterior, holes: vec![] }).collect();
    for h in holes {
        // vertices of a hole lie on the exterior boundary only at shared lattice corners; test an edge midpoint
        let probe = Point::new((h[0].x + h[1].x) / 2.0, (h[0].y + h[1].y) / 2.0);
        let probe = Point::new(probe.x + 1e-7 * (h[1].y - h[0].y), probe.y - 1e-7 * (h[1].x - h[0].x));
        let owner = polys
            .iter()
            .enumerate()
            .filter(|(_, p)| point_in_ring(probe, &p.exterior))
            .min_by(|a, b| shoelace_area(&a.1.exterior).total_cmp(&shoelace_area(&b.1.exterior)))
            .map(|(i, _)| i)
            .expect("hole outside every exterior");
        polys[owner].holes.push(h);
    }
    polys
}

/// Builds the map for a style. Coordinates are in lattice units scaled to
/// roughly 10 km per cell, y down.
pub fn generate(style: &MapStyle) -> MapModel {
    let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
    let (w, h) = if style.aspect <= 1.0 {
        (style.grid, ((style.grid as f64 * style.aspect).round() as usize).max(8))
    } else {
        (((style.grid as f64 / style.aspect).round() as usize).max(8), style.grid)
    };
    let pad = if style.islands > 0 || style.multipart { (style.grid / 5).max(8) } else { 0 };
    let (gw, gh) = (w + 2 + pad, h + 2);
    let mut g = Grid { w: gw, h: gh, cells: vec![BG; gw * gh] };
    let mainland = style.regions - style.islands;
    const MASK: u32 = UNSET - 1;
    blob_mask(&mut g, 1.0 + w as f64 / 2.0, 1.0 + h as f64 / 2.0, w as f64 * 0.46, h as f64 * 0.46, style.roughness, &mut rng, MASK);
    voronoi(&mut g, MASK, 0, mainland, &mut rng);

    // islands in the right-hand margin, stacked vertically
    let extra = style.islands + usize::from(style.multipart);
    for k in 0..extra {
        let cx = (w + 2) as f64 + pad as f64 * 0.5;
        let cy = gh as f64 * (k as f64 + 0.5) / extra as f64;
        let r = (pad as f64 * 0.32).min(gh as f64 / extra as f64 * 0.35);
        let label = if k < style.islands { (mainland + k) as u32 } else { 0 };
        blob_mask(&mut g, cx, cy, r, r * 1.2, 0.05, &mut rng, label);
    }
    // the multipart island belongs to region 0 but must survive the largest-component pass
    let multipart_cells: Vec<usize> = if style.multipart {
        let x0 = w + 2;
        (0..g.cells.len()).filter(|&p| p % gw >= x0 && g.cells[p] == 0).collect()
    } else {
        vec![]
    };
    let marker = style.regions as u32;
    for &p in &multipart_cells {
        g.cells[p] = marker;
    }
    clean(&mut g, style.regions as u32 + 1);
    for c in &mut g.cells {
        if *c == marker {
            *c = 0;
        }
    }

    let warp = Warp::new(&mut rng);
    const CELL_KM: f64 = 10_000.0;
    let regions: Vec<Region> = (0..style.regions as u32)
        .map(|label| {
            let loops: Vec<Vec<Point>> = trace(&g, label)
                .into_iter()
                .map(|r| {
                    r.into_iter()
                        .map(|v| {
                            let p = warp.apply(v);
                            Point::new(p.x * CELL_KM, p.y * CELL_KM)
                        })
                        .collect()
                })
                .collect();
            assert!(!loops.is_empty(), "region {label} vanished during cleanup");
            let i = label as usize + 1;
            Region {
                id: format!("{}{:02}", style.id_prefix, i),
                name: format!("{} region {:02}", capitalize(&style.name), i),
                polygons: polygons_from_loops(loops),
                statistic: 1.0,
            }
        })
        .collect();
    let mut map = MapModel::new(regions);
    let dist = LogNormal::new(0.0, style.sigma).expect("valid sigma");
    let stats: Vec<f64> = map
        .regions
        .iter()
        .map(|r| {
            let v = r.area() / 1e6 * 80.0 * dist.sample(&mut rng);
            (v.round()).max(1.0)
        })
        .collect();
    map = map.with_statistics(&stats).expect("matching length");
    map
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// `steps` statistic vectors starting at the map's statistics. Each
/// region follows a smooth multiplicative walk whose per-step change is
/// at most `max_change` (relative).
pub fn varying_series(map: &MapModel, steps: usize, max_change: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64)> = map.regions.iter().map(|_| (rng.gen_range(0.2..0.6), rng.gen_range(0.0..2.0 * PI))).collect();
    let base = map.statistics();
    let mut out = Vec::with_capacity(steps);
    let mut cur = base.clone();
    for t in 0..steps {
        if t > 0 {
            for (v, &(f, ph)) in cur.iter_mut().zip(&params) {
                let rate = max_change * 0.999 * (f * t as f64 + ph).sin();
                *v *= 1.0 + rate;
            }
        }
        out.push(cur.clone());
    }
    out
}
