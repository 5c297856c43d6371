//! Artifact writers: SVG rendering with the shared color ramp, and raw
//! texture dumps for debugging.
//!
//! Dump layouts, all row-major with pixel `(i, j)` at `j * n + i` and row
//! 0 at the top of the domain:
//!
//! * PGM: binary `P5`, header `P5\n{n} {n}\n65535\n`, 16-bit big-endian
//!   samples.
//! * `.f32`: `n * n` little-endian float32 values, no header.
//! * Labels: PGM sample `region index + 1` with 0 for background; the
//!   `.f32` form stores the region index and `-1` for background.
//! * Integral images `.f64`: eight consecutive `n * n` little-endian
//!   float64 planes in the order alpha, beta, gamma, delta, alpha_t,
//!   beta_t, gamma_t, delta_t.
//! * Displacement field `.f32`: interleaved `(ux, uy)` float32 pairs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::det::DisplacementField;
use crate::error::{Error, Result};
use crate::geo::{MapModel, Point};
use crate::inim::IntegralImageSet;
use crate::raster::{DensityTexture, LabelTexture, BACKGROUND};

const BUNDLED_RAMP: &str = include_str!("../../../assets/color_ramp.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampStop {
    pub at: f64,
    pub color: String,
}

/// Piecewise-linear RGB ramp over `domain`; values outside clamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorRamp {
    pub name: String,
    pub domain: [f64; 2],
    pub stops: Vec<RampStop>,
    pub background: String,
    pub stroke: String,
}

fn parse_hex(c: &str) -> Result<[u8; 3]> {
    let h = c.strip_prefix('#').unwrap_or(c);
    if h.len() != 6 {
        return Err(Error::Malformed(format!("bad color {c:?}")));
    }
    let byte = |k: usize| u8::from_str_radix(&h[k..k + 2], 16).map_err(|_| Error::Malformed(format!("bad color {c:?}")));
    Ok([byte(0)?, byte(2)?, byte(4)?])
}

impl ColorRamp {
    /// The ramp shipped in `assets/color_ramp.json`, shared with the web client.
    pub fn bundled() -> ColorRamp {
        ColorRamp::from_json(BUNDLED_RAMP).expect("bundled ramp is valid")
    }

    pub fn from_json(s: &str) -> Result<ColorRamp> {
        let ramp: ColorRamp = serde_json::from_str(s)?;
        if ramp.stops.is_empty() || !(ramp.domain[0] < ramp.domain[1]) {
            return Err(Error::Malformed("color ramp needs stops and an increasing domain".into()));
        }
        for w in ramp.stops.windows(2) {
            if !(w[0].at <= w[1].at) {
                return Err(Error::Malformed("color ramp stops must be sorted".into()));
            }
        }
        for s in &ramp.stops {
            parse_hex(&s.color)?;
        }
        parse_hex(&ramp.background)?;
        parse_hex(&ramp.stroke)?;
        Ok(ramp)
    }

    /// Hex color for `v`.
    pub fn color(&self, v: f64) -> String {
        let v = if v.is_nan() { self.domain[0] } else { v.clamp(self.domain[0], self.domain[1]) };
        let rgb = |s: &RampStop| parse_hex(&s.color).expect("validated");
        let first = &self.stops[0];
        let last = &self.stops[self.stops.len() - 1];
        let c = if v <= first.at {
            rgb(first)
        } else if v >= last.at {
            rgb(last)
        } else {
            let k = self.stops.windows(2).position(|w| v <= w[1].at).expect("inside range");
            let (a, b) = (&self.stops[k], &self.stops[k + 1]);
            let t = if b.at > a.at { (v - a.at) / (b.at - a.at) } else { 0.0 };
            let (ca, cb) = (rgb(a), rgb(b));
            let mut c = [0u8; 3];
            for i in 0..3 {
                c[i] = (ca[i] as f64 + (cb[i] as f64 - ca[i] as f64) * t).round() as u8;
            }
            c
        };
        format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
    }
}

/// Per-region quantity used as fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coloring {
    None,
    #[default]
    ShapeDistortion,
    CartographicError,
}

impl Coloring {
    pub fn label(self) -> &'static str {
        match self {
            Coloring::None => "",
            Coloring::ShapeDistortion => "shape distortion",
            Coloring::CartographicError => "cartographic error",
        }
    }
}

impl std::str::FromStr for Coloring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Coloring::None),
            "shape_distortion" | "shape" => Ok(Coloring::ShapeDistortion),
            "cartographic_error" | "error" => Ok(Coloring::CartographicError),
            _ => Err(Error::InvalidParameter(format!("unknown coloring {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Width and height of the map area in SVG units.
    pub size: f64,
    pub legend: bool,
    pub title: Option<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { size: 800.0, legend: true, title: None }
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ring_path(out: &mut String, ring: &[Point], size: f64) {
    for (k, p) in ring.iter().enumerate() {
        let _ = write!(out, "{}{} {}", if k == 0 { "M" } else { "L" }, fmt(p.x * size), fmt(p.y * size));
    }
    out.push('Z');
}

/// Renders the map in texture coordinates (unit square, y down). With
/// `values`, region `i` is filled with `ramp.color(values[i])` and a legend
/// is drawn; otherwise regions get the lowest ramp color.
pub fn render_svg(map: &MapModel, values: Option<&[f64]>, coloring: Coloring, ramp: &ColorRamp, opts: &SvgOptions) -> String {
    let size = opts.size;
    let legend_h = if opts.legend && values.is_some() { 70.0 } else { 0.0 };
    let height = size + legend_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = fmt(size),
        h = fmt(height)
    );
    if let Some(t) = &opts.title {
        let _ = writeln!(s, "<title>{}</title>", escape(t));
    }
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{w}" fill="{}"/>"#, ramp.background, w = fmt(size));
    let _ = writeln!(s, r#"<g stroke="{}" stroke-width="0.6" stroke-linejoin="round" fill-rule="evenodd">"#, ramp.stroke);
    for (i, region) in map.regions.iter().enumerate() {
        let fill = match values {
            Some(v) => ramp.color(v.get(i).copied().unwrap_or(f64::NAN)),
            None => ramp.color(ramp.domain[0]),
        };
        let mut d = String::new();
        for ring in region.rings() {
            ring_path(&mut d, ring, size);
        }
        let value = values.and_then(|v| v.get(i)).map(|v| format!(" data-value=\"{v:.6}\"")).unwrap_or_default();
        let _ = writeln!(
            s,
            r#"<path id="{}" fill="{fill}"{value} d="{d}"><title>{}</title></path>"#,
            escape(&region.id),
            escape(&region.name)
        );
    }
    s.push_str("</g>\n");
    if legend_h > 0.0 {
        legend(&mut s, coloring, ramp, size);
    }
    s.push_str("</svg>\n");
    s
}

fn legend(s: &mut String, coloring: Coloring, ramp: &ColorRamp, size: f64) {
    let (x0, y0, w, h) = (20.0, size + 18.0, (size - 40.0).max(10.0), 14.0);
    let [lo, hi] = ramp.domain;
    s.push_str("<defs><linearGradient id=\"ramp\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\">");
    for stop in &ramp.stops {
        let _ = write!(s, r#"<stop offset="{}" stop-color="{}"/>"#, fmt((stop.at - lo) / (hi - lo)), stop.color);
    }
    s.push_str("</linearGradient></defs>\n");
    let _ = writeln!(s, r#"<g class="legend" font-family="sans-serif" font-size="11" fill="{}">"#, ramp.stroke);
    let _ = writeln!(s, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="url(#ramp)" stroke="{}"/>"#, fmt(x0), fmt(y0), fmt(w), fmt(h), ramp.stroke);
    for stop in &ramp.stops {
        let x = x0 + w * (stop.at - lo) / (hi - lo);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt(x), fmt(y0 + h + 13.0), fmt_tick(stop.at));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, fmt(x0), fmt(y0 - 4.0), coloring.label());
    s.push_str("</g>\n");
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').map(|t| format!("{t}.0")).unwrap_or_else(|| s.to_owned())
}

/// 16-bit PGM of `values` scaled so that `max` maps to 65535.
pub fn pgm16(values: &[f64], n: usize, max: f64) -> Vec<u8> {
    let mut out = format!("P5\n{n} {n}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    for &v in values {
        let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn f32_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn density_pgm(d: &DensityTexture) -> Vec<u8> {
    pgm16(&d.d, d.size, d.d.iter().copied().fold(0.0, f64::max))
}

pub fn labels_pgm(l: &LabelTexture) -> Vec<u8> {
    let v: Vec<f64> = l.labels.iter().map(|&x| if x == BACKGROUND { 0.0 } else { x as f64 + 1.0 }).collect();
    pgm16(&v, l.size, 65535.0)
}

pub fn labels_f32(l: &LabelTexture) -> Vec<u8> {
    let v: Vec<f64> = l.labels.iter().map(|&x| if x == BACKGROUND { -1.0 } else { x as f64 }).collect();
    f32_le(&v)
}

pub fn inims_f64(ii: &IntegralImageSet) -> Vec<u8> {
    (0..8).flat_map(|c| ii.channel(c)).flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `labels.{pgm,f32}`, `density.{pgm,f32}`, `inims.f64` and
/// `field.f32` into `dir`.
pub fn write_dumps(dir: &Path, labels: &LabelTexture, density: &DensityTexture, ii: &IntegralImageSet, field: &DisplacementField) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("labels.pgm"), labels_pgm(labels))?;
    std::fs::write(dir.join("labels.f32"), labels_f32(labels))?;
    std::fs::write(dir.join("density.pgm"), density_pgm(density))?;
    std::fs::write(dir.join("density.f32"), f32_le(&density.d))?;
    std::fs::write(dir.join("inims.f64"), inims_f64(ii))?;
    std::fs::write(dir.join("field.f32"), field.to_f32_le())?;
    Ok(())
}
