use std::collections::HashMap;

use super::{Bounds, Point};

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection, including touching and collinear overlap.
fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Checks that a ring has at least three vertices, no repeated vertices,
/// no spikes, and no self-intersection. Returns a description of the first
/// problem found.
pub fn validate_ring(ring: &[Point]) -> Result<(), String> {
    let n = ring.len();
    if n < 3 {
        return Err(format!("ring has {n} vertices, at least 3 required"));
    }
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let c = ring[(i + 2) % n];
        if a == b {
            return Err(format!("repeated vertex at index {i}"));
        }
        let ab = Point::new(b.x - a.x, b.y - a.y);
        let bc = Point::new(c.x - b.x, c.y - b.y);
        if n > 3 || a != c {
            let crs = ab.x * bc.y - ab.y * bc.x;
            let dot = ab.x * bc.x + ab.y * bc.y;
            if crs == 0.0 && dot < 0.0 {
                return Err(format!("spike at vertex {}", (i + 1) % n));
            }
        }
    }
    if n == 3 {
        return if cross(ring[0], ring[1], ring[2]) == 0.0 {
            Err("degenerate triangle".into())
        } else {
            Ok(())
        };
    }

    // Bucket segments on a grid of roughly sqrt(n) cells per side.
    let b = Bounds::of(ring.iter().copied()).expect("non-empty");
    let side = ((n as f64).sqrt().ceil() as usize).max(1);
    let w = b.width().max(f64::MIN_POSITIVE);
    let h = b.height().max(f64::MIN_POSITIVE);
    let cell_of = |p: Point| -> (usize, usize) {
        let cx = (((p.x - b.min.x) / w) * side as f64).floor() as isize;
        let cy = (((p.y - b.min.y) / h) * side as f64).floor() as isize;
        (cx.clamp(0, side as isize - 1) as usize, cy.clamp(0, side as isize - 1) as usize)
    };
    let mut buckets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for i in 0..n {
        let (x0, y0) = cell_of(ring[i]);
        let (x1, y1) = cell_of(ring[(i + 1) % n]);
        for cx in x0.min(x1)..=x0.max(x1) {
            for cy in y0.min(y1)..=y0.max(y1) {
                buckets.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    for segs in buckets.values() {
        for (k, &i) in segs.iter().enumerate() {
            for &j in &segs[k + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, bb) = (ring[i], ring[(i + 1) % n]);
                let (c, d) = (ring[j], ring[(j + 1) % n]);
                if segments_touch(a, bb, c, d) {
                    return Err(format!("edges {i} and {j} intersect"));
                }
            }
        }
    }
    Ok(())
}
