#![allow(dead_code)]

use cartogram::geo::{MapModel, Point, Polygon, Region};

/// O(m²) channel sums straight from the sector definitions.
pub fn brute_inims(d: &[f64], n: usize) -> [Vec<f64>; 8] {
    let mut out: [Vec<f64>; 8] = Default::default();
    for c in out.iter_mut() {
        *c = vec![0.0; n * n];
    }
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let mut s = [0.0; 8];
            for jj in 0..n as i64 {
                for ii in 0..n as i64 {
                    let v = d[(jj as usize) * n + ii as usize];
                    let (a, b) = (ii - i, jj - j);
                    let q = match (ii <= i, jj <= j) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, false) => 2,
                        (false, true) => 3,
                    };
                    s[q] += v;
                    let t = if a == 0 && b == 0 {
                        4
                    } else if b < 0 && b <= a && a < -b {
                        4
                    } else if a < 0 && a < b && b <= -a {
                        5
                    } else if b > 0 && -b < a && a <= b {
                        6
                    } else if a > 0 && -a <= b && b < a {
                        7
                    } else {
                        panic!("pixel offset ({a}, {b}) in no sector")
                    };
                    s[t] += v;
                }
            }
            for c in 0..8 {
                out[c][(j as usize) * n + i as usize] = s[c];
            }
        }
    }
    out
}

pub fn rect(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, s: f64) -> Region {
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

/// Two equal halves of a 2:1 rectangle.
pub fn half_half(s: (f64, f64)) -> MapModel {
    MapModel::new(vec![rect("a", 0.0, 0.0, 1.0, 2.0, s.0), rect("b", 1.0, 0.0, 2.0, 2.0, s.1)])
}
