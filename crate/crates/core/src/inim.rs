//! Straight and 45°-tilted integral images of a density texture.
//!
//! Pixel `(i, j)` is column `i`, row `j`, with rows growing downward.
//! Straight channels split the texture into four axis-aligned quadrants
//! around the query pixel:
//!
//! * `alpha`: `i' <= i, j' <= j` (top-left)
//! * `beta`:  `i' <= i, j' >  j` (bottom-left)
//! * `gamma`: `i' >  i, j' >  j` (bottom-right)
//! * `delta`: `i' >  i, j' <= j` (top-right)
//!
//! Tilted channels split it by the two diagonals through the query pixel.
//! With `a = i' - i`, `b = j' - j`:
//!
//! * `alpha_t` (top):    `b < 0, b <= a < -b`, plus the query pixel
//! * `beta_t` (left):    `a < 0, a < b <= -a`
//! * `gamma_t` (bottom): `b > 0, -b < a <= b`
//! * `delta_t` (right):  `a > 0, -a <= b < a`
//!
//! Diagonal ties go to top/bottom along `a = b` and to left/right along
//! `a = -b`, so the four sectors are disjoint and cover the texture.
//! Every channel is built in O(m) from prefix sums.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raster::DensityTexture;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImageSet {
    pub size: usize,
    /// Top-left quadrant sums. `beta`, `gamma` and `delta` are differences
    /// of `alpha` against its last row and column, see
    /// [`IntegralImageSet::straight`].
    pub alpha: Vec<f64>,
    pub alpha_t: Vec<f64>,
    pub beta_t: Vec<f64>,
    pub gamma_t: Vec<f64>,
    pub delta_t: Vec<f64>,
    /// Total mass C.
    pub total: f64,
}

pub struct TiltedChannels {
    pub alpha_t: Vec<f64>,
    pub beta_t: Vec<f64>,
    pub gamma_t: Vec<f64>,
    pub delta_t: Vec<f64>,
}

impl IntegralImageSet {
    /// A set with no pixels, to be filled by [`IntegralImageSet::compute_into`].
    pub fn empty() -> Self {
        IntegralImageSet {
            size: 0,
            alpha: vec![],
            alpha_t: vec![],
            beta_t: vec![],
            gamma_t: vec![],
            delta_t: vec![],
            total: 0.0,
        }
    }

    pub fn compute(d: &DensityTexture, exec: Exec) -> Result<Self> {
        Self::from_values(&d.d, d.size, exec)
    }

    pub fn from_values(d: &[f64], n: usize, exec: Exec) -> Result<Self> {
        let mut set = Self::empty();
        set.compute_into(d, n, exec)?;
        Ok(set)
    }

    /// Recomputes every channel in place, reusing the buffers.
    pub fn compute_into(&mut self, d: &[f64], n: usize, exec: Exec) -> Result<()> {
        if d.len() != n * n {
            return Err(Error::SizeMismatch { expected: n, actual: (d.len() as f64).sqrt() as usize });
        }
        let m = n * n;
        for v in [&mut self.alpha, &mut self.alpha_t, &mut self.beta_t, &mut self.gamma_t, &mut self.delta_t] {
            v.resize(m, 0.0);
        }
        self.size = n;
        let IntegralImageSet { alpha, alpha_t, beta_t, gamma_t, delta_t, .. } = self;
        let (total, ()) = exec.join(
            || alpha_into(d, n, alpha),
            || tilted_into(d, n, exec, alpha_t, beta_t, gamma_t, delta_t),
        );
        self.total = total;
        Ok(())
    }

    /// `alpha`, `beta`, `gamma`, `delta` at pixel `p` (row-major index).
    #[inline]
    pub fn straight(&self, p: usize) -> [f64; 4] {
        let n = self.size;
        let a = self.alpha[p];
        // mass in columns <= i, and in rows <= j
        let left = self.alpha[(n - 1) * n + p % n];
        let above = self.alpha[p - p % n + n - 1];
        [a, left - a, self.total - left - above + a, above - a]
    }

    /// The eight channel values at pixel `p`.
    #[inline]
    pub fn at(&self, p: usize) -> [f64; 8] {
        let [a, b, g, d] = self.straight(p);
        [a, b, g, d, self.alpha_t[p], self.beta_t[p], self.gamma_t[p], self.delta_t[p]]
    }

    /// Channel `c` (0..8, in [`IntegralImageSet::at`] order) as a full plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        match c {
            0 => self.alpha.clone(),
            1..=3 => (0..self.size * self.size).map(|p| self.straight(p)[c]).collect(),
            4 => self.alpha_t.clone(),
            5 => self.beta_t.clone(),
            6 => self.gamma_t.clone(),
            7 => self.delta_t.clone(),
            _ => panic!("channel index {c} out of range"),
        }
    }

    /// Channels bilinearly interpolated between pixel centers at the
    /// normalized position `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> [f64; 8] {
        let (i0, i1, tx) = bilinear_axis(x, self.size);
        let (j0, j1, ty) = bilinear_axis(y, self.size);
        let n = self.size;
        let c00 = self.at(j0 * n + i0);
        let c10 = self.at(j0 * n + i1);
        let c01 = self.at(j1 * n + i0);
        let c11 = self.at(j1 * n + i1);
        let mut out = [0.0; 8];
        for k in 0..8 {
            let top = c00[k] + (c10[k] - c00[k]) * tx;
            let bot = c01[k] + (c11[k] - c01[k]) * tx;
            out[k] = top + (bot - top) * ty;
        }
        out
    }
}

/// Pixel-center interpolation stencil along one axis: indices and weight
/// of the upper neighbor. Positions outside the outermost centers clamp.
pub(crate) fn bilinear_axis(x: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let f = (x * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let i0 = (f.floor() as usize).min(n - 2);
    (i0, i0 + 1, f - i0 as f64)
}

/// Fills `alpha` by two prefix passes and returns the total mass.
pub fn alpha_into(d: &[f64], n: usize, alpha: &mut [f64]) -> f64 {
    let mut above = vec![0.0; n];
    for (row, dst) in d.chunks_exact(n).zip(alpha.chunks_exact_mut(n)) {
        let mut acc = 0.0;
        for ((v, a), o) in row.iter().zip(above.iter_mut()).zip(dst) {
            acc += *v;
            *a += acc;
            *o = *a;
        }
    }
    alpha.last().copied().unwrap_or(0.0)
}

/// Mass in the 45° cone strictly above (`down = false`) or below
/// (`down = true`) every pixel: for pixel `(i, j)` and step `r >= 1`, the
/// columns `[i - r + shift, i + r + shift)` of row `j -/+ r`. The upward
/// cone also includes the pixel itself.
///
/// With row prefixes `P(row, x) = Σ_{i' < x} d(i', row)` (x clamped to
/// `[0, n]`) the cone is `A - B`, where `A` and `B` accumulate `P` along
/// the two diagonals and satisfy one-step recurrences from the previous
/// row, so only one row of state each is kept.
fn vertical_cone(d: &[f64], n: usize, down: bool, shift: usize, out: &mut [f64]) {
    // a_row[n] holds `beyond`, b_row[0] stays zero: b_row[i + 1] is B(i)
    let mut a_row = vec![0.0; n + 1];
    let mut b_row = vec![0.0; n + 1];
    // pp[x + 1] = P(prev, clamp(x, 0, n)) for x in -1..=n + 1
    let mut pp = vec![0.0; n + 3];
    // mass of all rows strictly beyond the previous row
    let mut beyond = 0.0;
    for step in 0..n {
        let j = if down { n - 1 - step } else { step };
        let dst = &mut out[j * n..(j + 1) * n];
        if step == 0 {
            if down {
                dst.fill(0.0);
            } else {
                dst.copy_from_slice(&d[..n]);
            }
            continue;
        }
        let pr = if down { j + 1 } else { j - 1 };
        let mut acc = 0.0;
        for (p, v) in pp[1..=n].iter_mut().zip(&d[pr * n..(pr + 1) * n]) {
            *p = acc;
            acc += *v;
        }
        pp[n + 1] = acc;
        pp[n + 2] = acc;
        a_row[n] = beyond;
        // ascending i reads a_row[i + 1] before it changes; descending i
        // reads b_row[i] (B(i - 1)) before it changes
        for i in 0..n {
            a_row[i] = pp[i + 2 + shift] + a_row[i + 1];
        }
        for i in (0..n).rev() {
            b_row[i + 1] = pp[i + shift] + b_row[i];
        }
        if down {
            for ((o, a), b) in dst.iter_mut().zip(&a_row[..n]).zip(&b_row[1..]) {
                *o = a - b;
            }
        } else {
            // the top sector also owns the query pixel
            let own = &d[j * n..(j + 1) * n];
            for (((o, a), b), v) in dst.iter_mut().zip(&a_row[..n]).zip(&b_row[1..]).zip(own) {
                *o = (a - b) + v;
            }
        }
        beyond += acc;
    }
}

/// One horizontal cone (`left` or right) under construction. Column
/// prefixes `Q(c, y) = Σ_{j' < y} d(c, j')` and suffixes
/// `S(c, y) = Σ_{j' >= y}` keep both diagonal recurrences additive: the
/// cone is the mass of all columns on that side minus one diagonal sum of
/// `S`, built bottom-up, minus one of `Q`, built top-down.
struct SideCone<'a> {
    left: bool,
    out: &'a mut [f64],
    /// running `S` (bottom-up) or `Q` (top-down) per column
    acc: Vec<f64>,
    /// previous row of the diagonal sum
    diag: Vec<f64>,
}

impl<'a> SideCone<'a> {
    fn new(left: bool, out: &'a mut [f64], n: usize) -> Self {
        SideCone { left, out, acc: vec![0.0; n], diag: vec![0.0; n] }
    }

    fn reset(&mut self) {
        self.acc.fill(0.0);
        self.diag.fill(0.0);
    }

    /// Bottom-up row `j`: left uses `A(i, j) = S(i-1, j+2) + A(i-1, j+1)`,
    /// right uses `A(i, j) = S(i+1, j+1) + A(i+1, j+1)`, with `S = 0`
    /// below. Writes `-A`.
    fn lower_row(&mut self, d: &[f64], n: usize, j: usize) {
        let lead = if self.left { 2 } else { 1 };
        if j + lead < n {
            for (c, v) in self.acc.iter_mut().zip(&d[(j + lead) * n..(j + lead + 1) * n]) {
                *c += *v;
            }
        }
        let dst = &mut self.out[j * n..(j + 1) * n];
        if self.left {
            let mut a_left = 0.0;
            for i in 0..n {
                let a = if i >= 1 { self.acc[i - 1] + a_left } else { 0.0 };
                a_left = self.diag[i];
                self.diag[i] = a;
                dst[i] = -a;
            }
        } else {
            for i in 0..n {
                let a = if i + 1 < n { self.acc[i + 1] + self.diag[i + 1] } else { 0.0 };
                self.diag[i] = a;
                dst[i] = -a;
            }
        }
    }

    /// Top-down row `j`: left uses `B(i, j) = Q(i-1, j) + B(i-1, j-1)`,
    /// right uses `B(i, j) = Q(i+1, j-1) + B(i+1, j-1)`. Adds
    /// `side - B` to what [`SideCone::lower_row`] wrote.
    fn upper_row(&mut self, d: &[f64], n: usize, j: usize, side: &[f64]) {
        let dst = &mut self.out[j * n..(j + 1) * n];
        if self.left {
            let mut b_left = 0.0;
            for i in 0..n {
                let b = if i >= 1 { self.acc[i - 1] + b_left } else { 0.0 };
                b_left = self.diag[i];
                self.diag[i] = b;
                dst[i] += side[i] - b;
            }
        } else {
            // acc holds Q(., j - 1), zero for the first rows
            for i in 0..n {
                let b = if i + 1 < n { self.acc[i + 1] + self.diag[i + 1] } else { 0.0 };
                self.diag[i] = b;
                dst[i] += side[i] - b;
            }
        }
        let add = if self.left { Some(j) } else { j.checked_sub(1) };
        if let Some(r) = add {
            for (c, v) in self.acc.iter_mut().zip(&d[r * n..(r + 1) * n]) {
                *c += *v;
            }
        }
    }

    /// Mass of all columns strictly on this side of each column.
    fn side(&self, col_total: &[f64]) -> Vec<f64> {
        let n = col_total.len();
        let mut side = vec![0.0; n];
        let mut acc = 0.0;
        if self.left {
            for i in 0..n {
                side[i] = acc;
                acc += col_total[i];
            }
        } else {
            for i in (0..n).rev() {
                side[i] = acc;
                acc += col_total[i];
            }
        }
        side
    }
}

/// Builds the given horizontal cones in one bottom-up and one top-down
/// sweep over `d`.
fn horizontal_cones(d: &[f64], n: usize, cones: &mut [SideCone<'_>]) {
    let mut col_total = vec![0.0; n];
    for j in (0..n).rev() {
        for cone in cones.iter_mut() {
            cone.lower_row(d, n, j);
        }
        for (c, v) in col_total.iter_mut().zip(&d[j * n..(j + 1) * n]) {
            *c += *v;
        }
    }
    let sides: Vec<Vec<f64>> = cones.iter().map(|c| c.side(&col_total)).collect();
    for cone in cones.iter_mut() {
        cone.reset();
    }
    for j in 0..n {
        for (cone, side) in cones.iter_mut().zip(&sides) {
            cone.upper_row(d, n, j, side);
        }
    }
}

/// Fills the tilted channels of `d` into the given buffers.
pub fn tilted_into(d: &[f64], n: usize, exec: Exec, top: &mut [f64], left: &mut [f64], bottom: &mut [f64], right: &mut [f64]) {
    let horizontal = || {
        if exec.is_parallel() {
            exec.join(
                || horizontal_cones(d, n, &mut [SideCone::new(true, left, n)]),
                || horizontal_cones(d, n, &mut [SideCone::new(false, right, n)]),
            );
        } else {
            horizontal_cones(d, n, &mut [SideCone::new(true, left, n), SideCone::new(false, right, n)]);
        }
    };
    exec.join(
        || exec.join(|| vertical_cone(d, n, false, 0, top), || vertical_cone(d, n, true, 1, bottom)),
        horizontal,
    );
}

pub fn tilted_inims(d: &[f64], n: usize, exec: Exec) -> TiltedChannels {
    let mut t = TiltedChannels {
        alpha_t: vec![0.0; n * n],
        beta_t: vec![0.0; n * n],
        gamma_t: vec![0.0; n * n],
        delta_t: vec![0.0; n * n],
    };
    tilted_into(d, n, exec, &mut t.alpha_t, &mut t.beta_t, &mut t.gamma_t, &mut t.delta_t);
    t
}
