use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartogram")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn octet(out: &Path, extra: &[&str]) -> Output {
    let map = data("octet.geojson");
    let stats = data("octet_population.csv");
    let mut args = vec!["cartogram", "--map", s(&map), "--stats", s(&stats), "--texture-k", "8", "--out-dir", s(out)];
    args.extend_from_slice(extra);
    ok(&args)
}

fn coords(v: &Value) -> Vec<f64> {
    let mut out = Vec::new();
    fn walk(v: &Value, out: &mut Vec<f64>) {
        match v {
            Value::Number(n) => out.push(n.as_f64().unwrap()),
            Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    for f in v["features"].as_array().unwrap() {
        walk(&f["geometry"]["coordinates"], &mut out);
    }
    out
}

#[test]
fn france_defaults_converge_and_emit_svg() {
    let dir = tempfile::tempdir().unwrap();
    let map = data("france.geojson");
    let stats = data("france_population.csv");
    ok(&["cartogram", "--map", s(&map), "--stats", s(&stats), "--out-dir", s(dir.path())]);
    let run = json(&dir.path().join("run.json"));
    assert_eq!(run["stop"], "converged");
    assert!(run["xi"].as_f64().unwrap() < 0.01);
    let svg = std::fs::read_to_string(dir.path().join("cartogram.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("linearGradient"));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,epsilon,xi,millis\n"));
    assert_eq!(json(&dir.path().join("report.json"))["tau"], 0.0);
}

#[test]
fn zero_iterations_reproduce_the_input() {
    let dir = tempfile::tempdir().unwrap();
    octet(dir.path(), &["--iterations", "0"]);
    let input = coords(&json(&data("octet.geojson")));
    let output = coords(&json(&dir.path().join("cartogram.geojson")));
    assert_eq!(input.len(), output.len());
    // rings are re-emitted counter-clockwise, so compare as coordinate multisets
    let sorted = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v
    };
    for (a, b) in sorted(input).iter().zip(sorted(output)) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    octet(a.path(), &[]);
    octet(b.path(), &["--exec", "sequential"]);
    for f in ["cartogram.geojson", "cartogram.svg", "report.json", "regions.csv", "run.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn bdv_multiplier_changes_the_report() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    octet(a.path(), &[]);
    octet(b.path(), &["--bdv-multiplier", "1.05"]);
    assert_ne!(json(&a.path().join("report.json")), json(&b.path().join("report.json")));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"texture_k": 7, "max_iter": 3, "format": "geojson"}"#).unwrap();
    let out = dir.path().join("out");
    octet(&out, &["--config", s(&cfg), "--max-iter", "0"]);
    let echoed = json(&out.join("config.json"));
    assert_eq!(echoed["texture_k"], 8);
    assert_eq!(echoed["max_iter"], 0);
    assert_eq!(echoed["format"], "geojson");
    assert!(!out.join("cartogram.svg").exists());

    // the echoed config reproduces the run on its own
    let again = dir.path().join("again");
    let echo = out.join("config.json");
    ok(&["cartogram", "--config", s(&echo), "--out-dir", s(&again)]);
    assert_eq!(std::fs::read(out.join("cartogram.geojson")).unwrap(), std::fs::read(again.join("cartogram.geojson")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["cartogram", "--map", "/nonexistent.geojson", "--key", "population"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent.geojson"));

    let map = data("usa.geojson");
    let stats = data("usa_population.csv");
    let coarse = run(&["cartogram", "--map", s(&map), "--stats", s(&stats), "--texture-k", "4", "--out-dir", s(dir.path())]);
    assert_eq!(coarse.status.code(), Some(2), "{}", String::from_utf8_lossy(&coarse.stderr));

    let map = data("octet.geojson");
    let stats = data("octet_population.csv");
    let strict = run(&["cartogram", "--map", s(&map), "--stats", s(&stats), "--texture-k", "8", "--max-iter", "1", "--strict", "--out-dir", s(dir.path())]);
    assert_eq!(strict.status.code(), Some(3));
    let relaxed = run(&["cartogram", "--map", s(&map), "--stats", s(&stats), "--texture-k", "8", "--max-iter", "1", "--out-dir", s(dir.path())]);
    assert_eq!(relaxed.status.code(), Some(0));
}

#[test]
fn sweep_is_sorted_and_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let map = data("octet.geojson");
    let stats = data("octet_population.csv");
    let sweep = dir.path().join("sweep");
    ok(&["sweep-bdv", "--map", s(&map), "--stats", s(&stats), "--texture-k", "8", "--multipliers", "1.02,0.98,1.0", "--out-dir", s(&sweep)]);
    let mut rdr = csv_rows(&sweep.join("sweep.csv"));
    let header = rdr.remove(0);
    let m = header.iter().position(|h| h == "multiplier").unwrap();
    let ham = header.iter().position(|h| h == "hamming_avg").unwrap();
    let ms: Vec<f64> = rdr.iter().map(|r| r[m].parse().unwrap()).collect();
    assert_eq!(ms, vec![0.98, 1.0, 1.02]);

    let single = dir.path().join("single");
    octet(&single, &[]);
    let rep = json(&single.join("report.json"));
    let h: f64 = rdr[1][ham].parse().unwrap();
    assert_eq!(h, rep["hamming_avg"].as_f64().unwrap());
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn metrics_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let map = data("octet.geojson");
    let stats = data("octet_population.csv");
    ok(&["metrics", "--map", s(&map), "--stats", s(&stats), "--carto", s(&map), "--out-dir", s(dir.path())]);
    let rep = json(&dir.path().join("report.json"));
    for k in ["tau", "hamming_avg", "hamming_max", "R"] {
        assert_eq!(rep[k], 0.0, "{k}");
    }
}

#[test]
fn metrics_match_engine_report() {
    let dir = tempfile::tempdir().unwrap();
    octet(dir.path(), &[]);
    let map = data("octet.geojson");
    let stats = data("octet_population.csv");
    let carto = dir.path().join("cartogram.geojson");
    let scored = dir.path().join("scored");
    ok(&["metrics", "--map", s(&map), "--stats", s(&stats), "--carto", s(&carto), "--texture-k", "8", "--out-dir", s(&scored)]);
    let a = json(&dir.path().join("report.json"));
    let b = json(&scored.join("report.json"));
    for k in ["epsilon", "xi", "R"] {
        let (x, y) = (a[k].as_f64().unwrap(), b[k].as_f64().unwrap());
        assert!((x - y).abs() < 1e-9, "{k}: {x} vs {y}");
    }
    assert_eq!(a["tau"], b["tau"]);
    assert!((a["hamming_avg"].as_f64().unwrap() - b["hamming_avg"].as_f64().unwrap()).abs() < 1e-3);
}

#[test]
fn metrics_of_external_cartogram() {
    let dir = tempfile::tempdir().unwrap();
    let square = |id: &str, x0: f64, x1: f64, pop: u32| {
        format!(
            r#"{{"type":"Feature","id":"{id}","properties":{{"population":{pop}}},"geometry":{{"type":"Polygon","coordinates":[[[{x0},0],[{x1},0],[{x1},1],[{x0},1],[{x0},0]]]}}}}"#
        )
    };
    let original = format!(r#"{{"type":"FeatureCollection","features":[{},{}]}}"#, square("a", 0.0, 1.0, 1), square("b", 1.0, 2.0, 3));
    let exact = format!(r#"{{"type":"FeatureCollection","features":[{},{}]}}"#, square("a", 0.0, 0.5, 0), square("b", 0.5, 2.0, 0));
    let m = dir.path().join("map.geojson");
    let c = dir.path().join("flow.geojson");
    std::fs::write(&m, original).unwrap();
    std::fs::write(&c, exact).unwrap();
    ok(&["metrics", "--map", s(&m), "--key", "population", "--carto", s(&c), "--out-dir", s(dir.path())]);
    let rep = json(&dir.path().join("report.json"));
    assert!(rep["epsilon"].as_f64().unwrap() < 1e-12);
    assert_eq!(rep["tau"], 0.0);

    // unchanged map: errors 1/2 and 1/3
    ok(&["metrics", "--map", s(&m), "--key", "population", "--carto", s(&m), "--out-dir", s(dir.path())]);
    let rep = json(&dir.path().join("report.json"));
    assert!((rep["xi"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((rep["epsilon"].as_f64().unwrap() - 5.0 / 12.0).abs() < 1e-12);
}

#[test]
fn constant_series_gives_identical_frames() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("constant.csv");
    let src = std::fs::read_to_string(data("octet_population.csv")).unwrap();
    let mut csv = String::from("id,t0,t1,t2\n");
    for line in src.lines().skip(1) {
        let (id, v) = line.split_once(',').unwrap();
        csv.push_str(&format!("{id},{v},{v},{v}\n"));
    }
    std::fs::write(&stats, csv).unwrap();
    let map = data("octet.geojson");
    let out = dir.path().join("anim");
    ok(&["animate", "--map", s(&map), "--stats", s(&stats), "--texture-k", "7", "--format", "geojson", "--out-dir", s(&out)]);
    let f0 = std::fs::read(out.join("frames/t000.geojson")).unwrap();
    for t in 1..3 {
        assert_eq!(f0, std::fs::read(out.join(format!("frames/t{t:03}.geojson"))).unwrap());
    }
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["frames_per_step"], 10);
    assert_eq!(manifest["times"].as_array().unwrap().len(), 3);
}

#[test]
fn direct_and_cumulative_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let map = data("germany.geojson");
    let stats = data("germany_weekly.csv");
    let mut eps = Vec::new();
    for strategy in ["direct", "cumulative"] {
        let out = dir.path().join(strategy);
        ok(&["animate", "--map", s(&map), "--stats", s(&stats), "--texture-k", "7", "--strategy", strategy, "--format", "geojson", "--frames-per-step", "4", "--tweens", "--out-dir", s(&out)]);
        let m = json(&out.join("manifest.json"));
        assert_eq!(m["strategy"], strategy);
        let frames = m["frames"].as_array().unwrap();
        assert_eq!(frames.len(), 20);
        assert!(frames.iter().all(|f| f["millis"].is_null()));
        eps.push(frames.iter().map(|f| f["epsilon"].as_f64().unwrap()).collect::<Vec<_>>());
        assert_eq!(std::fs::read_dir(out.join("tweens")).unwrap().count(), 19 * 4 + 1);
    }
    for (d, c) in eps[0].iter().zip(&eps[1]) {
        assert!(*c <= 2.0 * d.max(0.005), "direct {d} cumulative {c}");
    }
}

#[test]
fn area_fraction_flags_are_validated() {
    let map = data("germany.geojson");
    let stats = data("germany_weekly.csv");
    let out = run(&["animate", "--map", s(&map), "--stats", s(&stats), "--amin", "0.9", "--amax", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["animate", "--map", s(&map), "--stats", s(&stats), "--window", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("t0:t1"));
}
