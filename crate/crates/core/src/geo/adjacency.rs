use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{MapModel, Point};

/// Unordered region-id pairs, stored with the smaller id first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency(BTreeSet<(String, String)>);

impl Adjacency {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts the pair; self-pairs are ignored.
    pub fn insert(&mut self, a: &str, b: &str) -> bool {
        match a.cmp(b) {
            std::cmp::Ordering::Less => self.0.insert((a.to_owned(), b.to_owned())),
            std::cmp::Ordering::Greater => self.0.insert((b.to_owned(), a.to_owned())),
            std::cmp::Ordering::Equal => false,
        }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        let key = if a <= b { (a.to_owned(), b.to_owned()) } else { (b.to_owned(), a.to_owned()) };
        self.0.contains(&key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn intersection_len(&self, other: &Adjacency) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn union_len(&self, other: &Adjacency) -> usize {
        self.0.union(&other.0).count()
    }

    /// Pairs involving `id`, as the other member.
    pub fn neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.iter().filter_map(move |(a, b)| {
            if a == id {
                Some(b)
            } else if b == id {
                Some(a)
            } else {
                None
            }
        })
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for Adjacency {
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        let mut a = Adjacency::new();
        for (x, y) in iter {
            a.insert(x, y);
        }
        a
    }
}

impl FromIterator<(String, String)> for Adjacency {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        let mut a = Adjacency::new();
        for (x, y) in iter {
            a.insert(&x, &y);
        }
        a
    }
}

fn bits(p: Point) -> (u64, u64) {
    // +0.0 and -0.0 must collide
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

/// Two regions are adjacent when each has at least two distinct boundary
/// vertices lying within `epsilon` of a boundary vertex of the other. A
/// shared edge gives two such vertices; a single touching corner gives one.
pub fn detect_adjacencies(map: &MapModel, epsilon: f64) -> Adjacency {
    let eps = epsilon.max(0.0);
    let cell = if eps > 0.0 { eps } else { 1.0 };
    let key = |p: Point| -> (i64, i64) { ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64) };

    // distinct vertices per region
    let mut per_region: Vec<Vec<Point>> = Vec::with_capacity(map.regions.len());
    for region in &map.regions {
        let mut seen = HashSet::new();
        let pts = region
            .rings()
            .flatten()
            .copied()
            .filter(|&p| seen.insert(bits(p)))
            .collect();
        per_region.push(pts);
    }

    let mut grid: HashMap<(i64, i64), Vec<(usize, Point)>> = HashMap::new();
    for (r, pts) in per_region.iter().enumerate() {
        for &p in pts {
            grid.entry(key(p)).or_default().push((r, p));
        }
    }

    // matched[(u, v)] = number of u's vertices that have a v vertex nearby
    let mut matched: HashMap<(usize, usize), usize> = HashMap::new();
    let mut hits: Vec<usize> = Vec::new();
    for (u, pts) in per_region.iter().enumerate() {
        for &p in pts {
            hits.clear();
            let (cx, cy) = key(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                    for &(v, q) in bucket {
                        if v != u && p.dist(q) <= eps && !hits.contains(&v) {
                            hits.push(v);
                        }
                    }
                }
            }
            for &v in &hits {
                *matched.entry((u, v)).or_default() += 1;
            }
        }
    }

    let mut out = Adjacency::new();
    for (&(u, v), &n_uv) in &matched {
        if u < v {
            let n_vu = matched.get(&(v, u)).copied().unwrap_or(0);
            if n_uv.min(n_vu) >= 2 {
                out.insert(&map.regions[u].id, &map.regions[v].id);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Polygon, Region};

    fn square_region(id: &str, x0: f64, y0: f64, s: f64) -> Region {
        Region {
            id: id.into(),
            name: id.into(),
            polygons: vec![Polygon {
                exterior: vec![
                    Point::new(x0, y0),
                    Point::new(x0 + s, y0),
                    Point::new(x0 + s, y0 + s),
                    Point::new(x0, y0 + s),
                ],
                holes: vec![],
            }],
            statistic: 1.0,
        }
    }

    #[test]
    fn shared_edge_is_adjacent() {
        let m = MapModel::new(vec![
            square_region("A", 0.0, 0.0, 0.5),
            square_region("B", 0.5, 0.0, 0.5),
        ]);
        let adj = detect_adjacencies(&m, 1e-3);
        assert_eq!(adj.len(), 1);
        assert!(adj.contains("A", "B"));
        assert!(adj.contains("B", "A"));
    }

    #[test]
    fn corner_touch_is_not_adjacent() {
        let m = MapModel::new(vec![
            square_region("A", 0.0, 0.0, 0.5),
            square_region("B", 0.5, 0.5, 0.4),
        ]);
        assert!(detect_adjacencies(&m, 1e-3).is_empty());
    }

    #[test]
    fn island_has_no_pairs() {
        let m = MapModel::new(vec![
            square_region("A", 0.0, 0.0, 0.3),
            square_region("B", 0.3, 0.0, 0.3),
            square_region("I", 0.8, 0.8, 0.1),
        ]);
        let adj = detect_adjacencies(&m, 1e-3);
        assert_eq!(adj.len(), 1);
        assert_eq!(adj.neighbors("I").count(), 0);
    }

    #[test]
    fn drift_within_epsilon_is_tolerated() {
        let mut b = square_region("B", 0.5 + 1e-4, 0.0, 0.5);
        b.polygons[0].exterior[3].y += 1e-4;
        let m = MapModel::new(vec![square_region("A", 0.0, 0.0, 0.5), b]);
        assert_eq!(detect_adjacencies(&m, 5e-4).len(), 1);
        assert_eq!(detect_adjacencies(&m, 5e-5).len(), 0);
    }

    #[test]
    fn rotation_of_ring_start_does_not_matter() {
        let a = square_region("A", 0.0, 0.0, 0.5);
        let mut b = square_region("B", 0.5, 0.0, 0.5);
        let m1 = MapModel::new(vec![a.clone(), b.clone()]);
        b.polygons[0].exterior.rotate_left(2);
        let m2 = MapModel::new(vec![a, b]);
        assert_eq!(detect_adjacencies(&m1, 1e-3), detect_adjacencies(&m2, 1e-3));
    }
}
