//! Regenerates the bundled fixtures in `data/`.
//!
//! `cargo run -p cartogram --example gen_fixtures [out_dir]`

use std::fmt::Write as _;
use std::path::PathBuf;

use cartogram::geo::{write_geojson, CoordinateFrame, JsonObject, MapModel};
use cartogram::synth::{generate, varying_series, MapStyle};

fn wide_csv(map: &MapModel, series: &[Vec<f64>], label: impl Fn(usize) -> String) -> String {
    let mut out = String::from("id");
    for t in 0..series.len() {
        write!(out, ",{}", label(t)).unwrap();
    }
    out.push('\n');
    for (r, region) in map.regions.iter().enumerate() {
        out.push_str(&region.id);
        for row in series {
            write!(out, ",{}", row[r].round().max(1.0)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn main() -> cartogram::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data").into()));
    std::fs::create_dir_all(&dir)?;
    for style in MapStyle::bundled() {
        let map = generate(&style);
        let extra: Vec<JsonObject> = map
            .regions
            .iter()
            .map(|r| {
                let mut o = JsonObject::new();
                o.insert("id".into(), r.id.clone().into());
                o.insert("population".into(), r.statistic.into());
                o
            })
            .collect();
        write_geojson(&dir.join(format!("{}.geojson", style.name)), &map, CoordinateFrame::Source, Some(&extra))?;
        let single = wide_csv(&map, &[map.statistics()], |_| "population".into());
        std::fs::write(dir.join(format!("{}_population.csv", style.name)), single)?;
        println!("{}: {} regions, {} vertices", style.name, map.regions.len(), map.vertex_count());
        if style.name == "germany" {
            let slow = varying_series(&map, 20, 0.03, 7);
            std::fs::write(dir.join("germany_weekly.csv"), wide_csv(&map, &slow, |t| format!("w{:02}", t + 1)))?;
            let fast = varying_series(&map, 12, 0.6, 8);
            std::fs::write(dir.join("germany_volatile.csv"), wide_csv(&map, &fast, |t| format!("w{:02}", t + 1)))?;
        }
    }
    Ok(())
}
