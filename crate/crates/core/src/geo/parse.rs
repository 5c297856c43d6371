use std::collections::HashSet;
use std::path::Path;

use geojson::{feature::Id, Feature, FeatureCollection, GeoJson, Geometry, JsonObject, Value};
use serde::{Deserialize, Serialize};

use super::{shoelace_area, validate_ring, MapModel, Point, Polygon, Region, Ring};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseOptions {
    /// Numeric feature property holding the statistic. When `None`, every
    /// region gets a unit placeholder that `attach_statistics` must replace.
    pub statistic_key: Option<String>,
    /// Property used as region id when a feature has no top-level `id`.
    pub id_property: String,
    pub name_property: String,
    pub validate: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            statistic_key: None,
            id_property: "id".into(),
            name_property: "name".into(),
            validate: true,
        }
    }
}

impl ParseOptions {
    pub fn with_statistic(key: impl Into<String>) -> Self {
        ParseOptions { statistic_key: Some(key.into()), ..Default::default() }
    }
}

fn id_string(id: &Id) -> String {
    match id {
        Id::String(s) => s.clone(),
        Id::Number(n) => n.to_string(),
    }
}

fn property_string(props: Option<&JsonObject>, key: &str) -> Option<String> {
    match props?.get(key)? {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn property_number(props: Option<&JsonObject>, key: &str) -> Option<f64> {
    match props?.get(key)? {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Converts a GeoJSON ring to the internal form: closing vertex dropped,
/// consecutive duplicates removed, y axis pointing down.
fn ingest_ring(raw: &[Vec<f64>], id: &str) -> Result<Ring> {
    let mut ring: Ring = Vec::with_capacity(raw.len());
    for pos in raw {
        if pos.len() < 2 {
            return Err(Error::InvalidRing { id: id.into(), reason: "position with fewer than 2 coordinates".into() });
        }
        let p = Point::new(pos[0], -pos[1]);
        if ring.last() != Some(&p) {
            ring.push(p);
        }
    }
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    Ok(ring)
}

fn orient(mut ring: Ring, exterior: bool) -> Ring {
    let a = shoelace_area(&ring);
    if (exterior && a < 0.0) || (!exterior && a > 0.0) {
        ring.reverse();
    }
    ring
}

fn ingest_polygon(raw: &[Vec<Vec<f64>>], id: &str, validate: bool) -> Result<Polygon> {
    let mut rings = Vec::with_capacity(raw.len());
    for r in raw {
        let ring = ingest_ring(r, id)?;
        if validate {
            validate_ring(&ring).map_err(|reason| Error::InvalidRing { id: id.into(), reason })?;
        } else if ring.len() < 3 {
            return Err(Error::InvalidRing { id: id.into(), reason: "fewer than 3 vertices".into() });
        }
        rings.push(ring);
    }
    let mut it = rings.into_iter();
    let exterior = it
        .next()
        .ok_or_else(|| Error::InvalidRing { id: id.into(), reason: "polygon without rings".into() })?;
    Ok(Polygon {
        exterior: orient(exterior, true),
        holes: it.map(|h| orient(h, false)).collect(),
    })
}

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features.
/// Coordinates stay in source units (with y flipped); see
/// [`super::normalize`].
pub fn parse_map(bytes: &[u8], opts: &ParseOptions) -> Result<MapModel> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
    let gj: GeoJson = text.parse().map_err(|e: geojson::Error| Error::Malformed(e.to_string()))?;
    let fc = match gj {
        GeoJson::FeatureCollection(fc) => fc,
        _ => return Err(Error::Malformed("expected a FeatureCollection".into())),
    };
    let mut regions = Vec::with_capacity(fc.features.len());
    let mut seen = HashSet::new();
    for (idx, feature) in fc.features.iter().enumerate() {
        let props = feature.properties.as_ref();
        let id = feature
            .id
            .as_ref()
            .map(id_string)
            .or_else(|| property_string(props, &opts.id_property))
            .ok_or_else(|| Error::Malformed(format!("feature {idx} has no id")))?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let geometry = feature
            .geometry
            .as_ref()
            .ok_or_else(|| Error::NonPolygonal { id: id.clone(), kind: "null".into() })?;
        let polygons = match &geometry.value {
            Value::Polygon(p) => vec![ingest_polygon(p, &id, opts.validate)?],
            Value::MultiPolygon(mp) => mp
                .iter()
                .map(|p| ingest_polygon(p, &id, opts.validate))
                .collect::<Result<Vec<_>>>()?,
            other => {
                return Err(Error::NonPolygonal { id: id.clone(), kind: other.type_name().to_string() })
            }
        };
        if polygons.is_empty() {
            return Err(Error::NonPolygonal { id, kind: "empty MultiPolygon".into() });
        }
        let statistic = match &opts.statistic_key {
            Some(key) => {
                let v = property_number(props, key).ok_or_else(|| Error::MissingStatistic(id.clone()))?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonPositiveStatistic { id, value: v });
                }
                v
            }
            None => 1.0,
        };
        let name = property_string(props, &opts.name_property).unwrap_or_else(|| id.clone());
        regions.push(Region { id, name, polygons, statistic });
    }
    if regions.is_empty() {
        return Err(Error::Malformed("FeatureCollection has no features".into()));
    }
    Ok(MapModel::new(regions))
}

/// Coordinate frame for emitted GeoJSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateFrame {
    /// Unit texture square, y up: `(x, 1 - y)`.
    Texture,
    /// Original source units via the inverse normalization.
    Source,
}

fn emit_ring(ring: &[Point], f: &dyn Fn(Point) -> Point) -> Vec<Vec<f64>> {
    // y flip reverses orientation; reverse again so exteriors come out
    // counter-clockwise as RFC 7946 recommends.
    let mut out: Vec<Vec<f64>> = ring.iter().rev().map(|&p| {
        let q = f(p);
        vec![q.x, q.y]
    }).collect();
    if let Some(first) = out.first().cloned() {
        out.push(first);
    }
    out
}

/// Builds a FeatureCollection. `extra[i]`, when given, is merged into the
/// properties of region `i`.
pub fn to_geojson(map: &MapModel, frame: CoordinateFrame, extra: Option<&[JsonObject]>) -> FeatureCollection {
    let norm = map.normalization;
    let f: Box<dyn Fn(Point) -> Point> = match frame {
        CoordinateFrame::Texture => Box::new(|p: Point| Point::new(p.x, 1.0 - p.y)),
        CoordinateFrame::Source => Box::new(move |p: Point| {
            let q = norm.invert(p);
            Point::new(q.x, -q.y)
        }),
    };
    let features = map
        .regions
        .iter()
        .enumerate()
        .map(|(i, region)| {
            let polys: Vec<Vec<Vec<Vec<f64>>>> = region
                .polygons
                .iter()
                .map(|p| p.rings().map(|r| emit_ring(r, &*f)).collect())
                .collect();
            let value = if polys.len() == 1 {
                Value::Polygon(polys.into_iter().next().expect("one polygon"))
            } else {
                Value::MultiPolygon(polys)
            };
            let mut props = JsonObject::new();
            props.insert("name".into(), region.name.clone().into());
            props.insert("statistic".into(), region.statistic.into());
            if let Some(extra) = extra.and_then(|e| e.get(i)) {
                for (k, v) in extra {
                    props.insert(k.clone(), v.clone());
                }
            }
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(value)),
                id: Some(Id::String(region.id.clone())),
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    FeatureCollection { bbox: None, features, foreign_members: None }
}

pub fn write_geojson(path: &Path, map: &MapModel, frame: CoordinateFrame, extra: Option<&[JsonObject]>) -> Result<()> {
    let fc = to_geojson(map, frame, extra);
    std::fs::write(path, GeoJson::FeatureCollection(fc).to_string())?;
    Ok(())
}
