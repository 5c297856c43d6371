mod common;

use cartogram::det::{residual_field, weights, BaseMap};
use cartogram::geo::Point;
use cartogram::inim::IntegralImageSet;
use cartogram::Exec;
use proptest::prelude::*;

/// Eq.-map evaluation from brute-force channels and hand-derived anchors.
fn brute_t(d: &[f64], n: usize) -> Vec<Point> {
    let ch = common::brute_inims(d, n);
    let c: f64 = d.iter().sum();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let p = j * n + i;
            let x = (i as f64 + 0.5) / n as f64;
            let y = (j as f64 + 0.5) / n as f64;
            // slope +1 line through (x, y) meets the border at q1 (below/right) and q3
            let down = (1.0 - x).min(1.0 - y);
            let up = x.min(y);
            let q1 = (x + down, y + down);
            let q3 = (x - up, y - up);
            // slope -1 line: q2 toward the top-right, q4 toward the bottom-left
            let tr = (1.0 - x).min(y);
            let bl = x.min(1.0 - y);
            let q2 = (x + tr, y - tr);
            let q4 = (x - bl, y + bl);
            let pts = [q1, q2, q3, q4, (x, 1.0), (1.0, y), (x, 0.0), (0.0, y)];
            let mut t = (0.0, 0.0);
            for k in 0..8 {
                t.0 += ch[k][p] * pts[k].0 / (2.0 * c);
                t.1 += ch[k][p] * pts[k].1 / (2.0 * c);
            }
            out.push(Point::new(t.0, t.1));
        }
    }
    out
}

#[test]
fn constant_density_is_a_fixed_point() {
    let n = 256;
    let ii = IntegralImageSet::from_values(&vec![3.25; n * n], n, Exec::default()).unwrap();
    let base = BaseMap::compute(n, Exec::default()).unwrap();
    let u = residual_field(&ii, &base, Exec::default()).unwrap();
    assert!(u.max_norm() < 1e-6, "{}", u.max_norm());
}

#[test]
fn heavy_left_half_expands_rightward() {
    let n = 8;
    let d: Vec<f64> = (0..n * n).map(|p| if p % n < n / 2 { 3.0 } else { 1.0 }).collect();
    let t = brute_t(&d, n);
    let t0 = brute_t(&vec![1.0; n * n], n);
    let ii = IntegralImageSet::from_values(&d, n, Exec::Sequential).unwrap();
    let u = residual_field(&ii, &BaseMap::compute(n, Exec::Sequential).unwrap(), Exec::Sequential).unwrap();
    for j in 0..n {
        for i in 0..n {
            let p = j * n + i;
            let (bx, by) = (t[p].x - t0[p].x, t[p].y - t0[p].y);
            assert!((u.u[p].x - bx).abs() < 1e-12 && (u.u[p].y - by).abs() < 1e-12);
            if i >= n / 2 && i < n - 1 {
                assert!(u.u[p].x > 0.0, "pixel ({i},{j}) u = {:?}", u.u[p]);
            }
        }
    }
}

#[test]
fn base_map_matches_brute_force() {
    let n = 16;
    let base = BaseMap::compute(n, Exec::Sequential).unwrap();
    let t0 = brute_t(&vec![1.0; n * n], n);
    for (a, b) in base.t.iter().zip(&t0) {
        assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn residual_is_scale_invariant(d in prop::collection::vec(0.01f64..10.0, 16 * 16), c in 0.01f64..100.0) {
        let n = 16;
        let base = BaseMap::compute(n, Exec::Sequential).unwrap();
        let scaled: Vec<f64> = d.iter().map(|v| v * c).collect();
        let a = residual_field(&IntegralImageSet::from_values(&d, n, Exec::Sequential).unwrap(), &base, Exec::Sequential).unwrap();
        let b = residual_field(&IntegralImageSet::from_values(&scaled, n, Exec::Sequential).unwrap(), &base, Exec::Sequential).unwrap();
        for (p, q) in a.u.iter().zip(&b.u) {
            prop_assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_close_to_one(d in prop::collection::vec(0.0f64..10.0, 12 * 12)) {
        let n = 12;
        let ii = IntegralImageSet::from_values(&d, n, Exec::Sequential).unwrap();
        prop_assume!(ii.total > 0.0);
        for p in 0..n * n {
            let s: f64 = weights(&ii.at(p), ii.total).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
