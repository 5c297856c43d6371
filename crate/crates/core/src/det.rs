//! Anchor-point mapping, residual displacement field, and vertex advection.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geo::Point;
use crate::inim::{bilinear_axis, IntegralImageSet};

/// Border intersections of the two diagonals through a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSet {
    pub q1: Point,
    pub q2: Point,
    pub q3: Point,
    pub q4: Point,
}

impl AnchorSet {
    /// Axis anchors `(x,1), (1,y), (x,0), (0,y)`.
    pub fn axis(x: f64, y: f64) -> [Point; 4] {
        [Point::new(x, 1.0), Point::new(1.0, y), Point::new(x, 0.0), Point::new(0.0, y)]
    }
}

pub fn anchors(x: f64, y: f64) -> AnchorSet {
    let (q1, q3) = if y < x {
        (Point::new(1.0, 1.0 + y - x), Point::new(x - y, 0.0))
    } else {
        (Point::new(1.0 - y + x, 1.0), Point::new(0.0, y - x))
    };
    let (q2, q4) = if x + y < 1.0 {
        (Point::new(x + y, 0.0), Point::new(0.0, x + y))
    } else {
        (Point::new(1.0, x + y - 1.0), Point::new(x + y - 1.0, 1.0))
    };
    AnchorSet { q1, q2, q3, q4 }
}

/// The eight mapping weights `channel / 2C` in the order
/// `alpha, beta, gamma, delta, alpha_t, beta_t, gamma_t, delta_t`.
pub fn weights(channels: &[f64; 8], total: f64) -> [f64; 8] {
    let s = 0.5 / total;
    channels.map(|c| c * s)
}

fn combine(x: f64, y: f64, c: &[f64; 8], total: f64) -> Point {
    let q = anchors(x, y);
    let e = AnchorSet::axis(x, y);
    let w = weights(c, total);
    let pts = [q.q1, q.q2, q.q3, q.q4, e[0], e[1], e[2], e[3]];
    let mut out = Point::new(0.0, 0.0);
    for (p, wk) in pts.iter().zip(w) {
        out.x += wk * p.x;
        out.y += wk * p.y;
    }
    out
}

/// `t(x, y; d)` with channels interpolated between pixel centers.
pub fn mapping_t(x: f64, y: f64, ii: &IntegralImageSet) -> Result<Point> {
    if !(ii.total > 0.0) {
        return Err(Error::InvalidDensity(ii.total));
    }
    Ok(combine(x, y, &ii.sample(x, y), ii.total))
}

fn pixel_center(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// `t` evaluated at every pixel center.
pub fn mapping_field(ii: &IntegralImageSet, exec: Exec) -> Result<Vec<Point>> {
    if !(ii.total > 0.0) {
        return Err(Error::InvalidDensity(ii.total));
    }
    let n = ii.size;
    let mut out = vec![Point::new(0.0, 0.0); n * n];
    exec.for_each_row(&mut out, n, |j, row| {
        let y = pixel_center(j, n);
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = combine(pixel_center(i, n), y, &ii.at(j * n + i), ii.total);
        }
    });
    Ok(out)
}

/// `t(x, y; d0)` at every pixel center for a constant density.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMap {
    pub size: usize,
    pub t: Vec<Point>,
}

impl BaseMap {
    pub fn compute(size: usize, exec: Exec) -> Result<Self> {
        let ii = IntegralImageSet::from_values(&vec![1.0; size * size], size, exec)?;
        Ok(BaseMap { size, t: mapping_field(&ii, exec)? })
    }

    /// Shared instance for a texture size, computed on first use.
    pub fn cached(size: usize, exec: Exec) -> Result<Arc<BaseMap>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<BaseMap>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(b) = cache.lock().expect("base cache poisoned").get(&size) {
            return Ok(Arc::clone(b));
        }
        let base = Arc::new(BaseMap::compute(size, exec)?);
        cache.lock().expect("base cache poisoned").entry(size).or_insert_with(|| Arc::clone(&base));
        Ok(base)
    }
}

/// Per-pixel displacement `u = t(d) - t(d0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub size: usize,
    pub u: Vec<Point>,
    /// Pixels whose displaced center had to be clamped into the domain.
    pub clamped: usize,
}

impl DisplacementField {
    pub fn zero(size: usize) -> Self {
        DisplacementField { size, u: vec![Point::new(0.0, 0.0); size * size], clamped: 0 }
    }

    pub fn max_norm(&self) -> f64 {
        self.u.iter().map(|p| p.x.hypot(p.y)).fold(0.0, f64::max)
    }

    /// Bilinear sample between pixel centers.
    pub fn sample(&self, x: f64, y: f64) -> Point {
        let n = self.size;
        let (i0, i1, tx) = bilinear_axis(x, n);
        let (j0, j1, ty) = bilinear_axis(y, n);
        let a = self.u[j0 * n + i0];
        let b = self.u[j0 * n + i1];
        let c = self.u[j1 * n + i0];
        let d = self.u[j1 * n + i1];
        let top = a.lerp(b, tx);
        let bot = c.lerp(d, tx);
        top.lerp(bot, ty)
    }

    /// Interleaved little-endian f32 `(ux, uy)` pairs, row-major.
    pub fn to_f32_le(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.u.len() * 8);
        for p in &self.u {
            out.extend_from_slice(&(p.x as f32).to_le_bytes());
            out.extend_from_slice(&(p.y as f32).to_le_bytes());
        }
        out
    }
}

pub fn residual_field(ii: &IntegralImageSet, base: &BaseMap, exec: Exec) -> Result<DisplacementField> {
    let mut field = DisplacementField { size: 0, u: Vec::new(), clamped: 0 };
    residual_field_into(ii, base, exec, &mut field)?;
    Ok(field)
}

/// [`residual_field`] writing into an existing field.
pub fn residual_field_into(ii: &IntegralImageSet, base: &BaseMap, exec: Exec, field: &mut DisplacementField) -> Result<()> {
    if ii.size != base.size {
        return Err(Error::SizeMismatch { expected: base.size, actual: ii.size });
    }
    if !(ii.total > 0.0) {
        return Err(Error::InvalidDensity(ii.total));
    }
    let n = ii.size;
    field.size = n;
    field.u.resize(n * n, Point::new(0.0, 0.0));
    let clamps = exec.map_rows(&mut field.u, n, |j, row| {
        let y = pixel_center(j, n);
        let mut clamped = 0usize;
        for (i, slot) in row.iter_mut().enumerate() {
            let p = j * n + i;
            let x = pixel_center(i, n);
            let t = combine(x, y, &ii.at(p), ii.total);
            let b = base.t[p];
            let u = Point::new(t.x - b.x, t.y - b.y);
            let (nx, ny) = (x + u.x, y + u.y);
            *slot = if (0.0..=1.0).contains(&nx) && (0.0..=1.0).contains(&ny) {
                u
            } else {
                clamped += 1;
                Point::new(nx.clamp(0.0, 1.0) - x, ny.clamp(0.0, 1.0) - y)
            };
        }
        clamped
    });
    let clamped = clamps.iter().sum();
    field.clamped = clamped;
    Ok(())
}

/// Moves each vertex by the bilinear sample of `u`, clamping into the
/// unit square. Returns the moved vertices and the number of clamps.
pub fn advect(vertices: &[Point], field: &DisplacementField, exec: Exec) -> (Vec<Point>, usize) {
    let moved = exec.map_slice(vertices, |&v| {
        let d = field.sample(v.x, v.y);
        let nx = v.x + d.x;
        let ny = v.y + d.y;
        let c = Point::new(nx.clamp(0.0, 1.0), ny.clamp(0.0, 1.0));
        (c, c.x != nx || c.y != ny)
    });
    let clamps = moved.iter().filter(|(_, c)| *c).count();
    (moved.into_iter().map(|(p, _)| p).collect(), clamps)
}
