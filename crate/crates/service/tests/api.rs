use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use cartogram::commands::{score_files, RunConfig};
use cartogram_service::{router, AppState, ServiceOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

struct Reply {
    status: StatusCode,
    etag: Option<String>,
    body: Value,
    text: String,
}

struct Client {
    app: Router,
    state: Arc<AppState>,
}

impl Client {
    fn new(options: ServiceOptions) -> Self {
        let state = AppState::new(options);
        Client { app: router(state.clone()), state }
    }

    async fn send(&self, req: Request<Body>) -> Reply {
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let etag = res.headers().get(header::ETAG).map(|v| v.to_str().unwrap().to_owned());
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        let body = serde_json::from_str(&text).unwrap_or(Value::Null);
        Reply { status, etag, body, text }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn post(&self, uri: &str, body: Value) -> Reply {
        let req = Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())).unwrap();
        self.send(req).await
    }

    async fn create(&self, body: Value) -> String {
        let r = self.post("/sessions", body).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        r.body["id"].as_str().unwrap().to_owned()
    }

    fn wait(&self, id: &str) {
        assert!(self.state.session(id).unwrap().wait_idle(Duration::from_secs(300)), "session {id} did not finish");
    }

    async fn frame(&self, id: &str, t: usize) -> Value {
        let r = self.get(&format!("/sessions/{id}/frames/{t}")).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        r.body
    }
}

fn france(params: Value) -> Value {
    json!({ "map": read("france.geojson"), "key": "population", "params": params })
}

fn weekly(params: Value) -> Value {
    json!({ "map": read("germany.geojson"), "stats": read("germany_weekly.csv"), "params": params })
}

fn fast() -> Value {
    json!({ "k": 6, "max_iter": 40 })
}

fn coords(geojson: &Value) -> Vec<f64> {
    fn walk(v: &Value, out: &mut Vec<f64>) {
        match v {
            Value::Number(n) => out.push(n.as_f64().unwrap()),
            Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    for f in geojson["features"].as_array().unwrap() {
        walk(&f["geometry"]["coordinates"], &mut out);
    }
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn frame_is_pending_then_done_and_status_stays_live() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(france(json!({ "k": 9 }))).await;
    let first = c.get(&format!("/sessions/{id}/frames/0")).await;
    assert_eq!(first.status, StatusCode::ACCEPTED, "{}", first.text);
    let status = first.body["status"][0].as_str().unwrap();
    assert!(status == "pending" || status == "running");

    let mut slowest = Duration::ZERO;
    let deadline = Instant::now() + Duration::from_secs(300);
    let done = loop {
        let began = Instant::now();
        let s = c.get(&format!("/sessions/{id}/status")).await;
        slowest = slowest.max(began.elapsed());
        assert_eq!(s.status, StatusCode::OK);
        let r = c.get(&format!("/sessions/{id}/frames/0")).await;
        if r.status == StatusCode::OK {
            break r;
        }
        assert_eq!(r.status, StatusCode::ACCEPTED);
        assert!(Instant::now() < deadline);
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert!(slowest < Duration::from_millis(250), "status poll took {slowest:?}");

    let body = &done.body;
    assert_eq!(body["t"], 0);
    assert_eq!(body["geojson"]["features"].as_array().unwrap().len(), 13);
    assert_eq!(body["geojson"]["frame"], "source");
    assert!(body["report"]["xi"].as_f64().unwrap() < 0.05);
    assert!(body["report"]["millis"].is_null());

    let again = c.get(&format!("/sessions/{id}/frames/0")).await;
    assert_eq!(again.etag, done.etag);
    assert_eq!(again.text, done.text);
    let tag = done.etag.clone().unwrap();
    let req = Request::get(format!("/sessions/{id}/frames/0")).header(header::IF_NONE_MATCH, &tag).body(Body::empty()).unwrap();
    let cached = c.send(req).await;
    assert_eq!(cached.status, StatusCode::NOT_MODIFIED);
    assert_eq!(cached.etag.as_deref(), Some(tag.as_str()));
}

#[tokio::test]
async fn summary_lists_totals_and_regions() {
    let c = Client::new(ServiceOptions::default());
    let r = c.post("/sessions", weekly(fast())).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let csv = read("germany_weekly.csv");
    let mut lines = csv.lines();
    let steps = lines.next().unwrap().split(',').count() - 1;
    let mut sums = vec![0.0; steps];
    for line in lines {
        for (t, v) in line.split(',').skip(1).enumerate() {
            sums[t] += v.parse::<f64>().unwrap();
        }
    }
    let m_i: Vec<f64> = r.body["m_i"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(m_i.len(), steps);
    for (a, b) in m_i.iter().zip(&sums) {
        assert!((a - b).abs() <= 1e-9 * b);
    }
    assert_eq!(r.body["times"][0], "w01");
    assert_eq!(r.body["regions"].as_array().unwrap().len(), 16);
    assert_eq!(r.body["regions"][0]["statistics"].as_array().unwrap().len(), steps);
}

#[tokio::test]
async fn bad_csv_is_rejected_with_row_diagnostics() {
    let c = Client::new(ServiceOptions::default());
    let csv = read("germany_population.csv").replacen("552143", "lots", 1);
    let r = c.post("/sessions", json!({ "map": read("germany.geojson"), "stats": csv, "key": "population" })).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{}", r.text);
    assert_eq!(r.body["code"], "invalid_input");
    assert_eq!(r.body["detail"]["value"], "lots");
    assert_eq!(r.body["detail"]["column"], "population");
    assert!(r.body["detail"]["row"].as_u64().is_some());
    assert!(r.body["message"].as_str().unwrap().contains("lots"));
}

#[tokio::test]
async fn malformed_geojson_is_422_and_bad_json_is_400() {
    let c = Client::new(ServiceOptions::default());
    let r = c.post("/sessions", json!({ "map": "{\"type\": \"Nope\"}", "key": "population" })).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{}", r.text);
    let req = Request::post("/sessions").body(Body::from("{not json")).unwrap();
    let r = c.send(req).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.body["message"].is_string());
}

#[tokio::test]
async fn same_upload_gives_same_dataset_hash() {
    let c = Client::new(ServiceOptions::default());
    let a = c.post("/sessions", france(fast())).await;
    let b = c.post("/sessions", france(json!({ "k": 7 }))).await;
    assert_eq!(a.body["dataset_hash"], b.body["dataset_hash"]);
    assert_ne!(a.body["id"], b.body["id"]);
    let other = c.post("/sessions", json!({ "map": read("france.geojson"), "key": "statistic", "params": fast() })).await;
    assert_ne!(a.body["dataset_hash"], other.body["dataset_hash"]);
    // a map sent as an object is accepted too
    let obj: Value = serde_json::from_str(&read("france.geojson")).unwrap();
    let r = c.post("/sessions", json!({ "map": obj, "key": "population", "params": fast() })).await;
    assert_eq!(r.status, StatusCode::CREATED);
}

#[tokio::test]
async fn invalid_parameters_are_400() {
    let c = Client::new(ServiceOptions::default());
    let r = c.post("/sessions", weekly(json!({ "k": 6, "amin": 0.6, "amax": 0.4 }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST, "{}", r.text);
    assert_eq!(r.body["code"], "invalid_parameter");

    let id = c.create(weekly(fast())).await;
    for bad in [
        json!({ "amin": 0.5, "amax": 0.5 }),
        json!({ "amin": 0.3 }),
        json!({ "bdv_multiplier": -1.0 }),
        json!({ "k": 40 }),
        json!({ "amin": 0.3, "amax": 0.6, "window": [3, 99] }),
        json!({ "colour": "red" }),
        json!([1, 2]),
    ] {
        let r = c.post(&format!("/sessions/{id}/params"), bad.clone()).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{bad}: {}", r.text);
        assert!(r.body["message"].is_string());
    }
    let unknown = c.post("/sessions/nope/params", json!({})).await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bdv_change_invalidates_every_frame_and_reverting_hits_the_cache() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(weekly(fast())).await;
    c.wait(&id);
    let before = c.get(&format!("/sessions/{id}/status")).await.body;
    assert_eq!(before["counts"]["done"], 20);

    let r = c.post(&format!("/sessions/{id}/params"), json!({ "bdv_multiplier": 1.05 })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(r.body["invalidated"], json!((0..20).collect::<Vec<_>>()));
    assert_eq!(r.body["params"]["bdv_multiplier"], 1.05);
    assert_eq!(r.body["params"]["k"], 6);
    assert_ne!(r.body["params_hash"], before["params_hash"]);
    c.wait(&id);

    let back = c.post(&format!("/sessions/{id}/params"), json!({ "bdv_multiplier": 1.0 })).await;
    assert_eq!(back.body["params_hash"], before["params_hash"]);
    let now = c.get(&format!("/sessions/{id}/status")).await.body;
    assert_eq!(now["counts"]["done"], 20, "reverted parameters should be served from cache");

    let same = c.post(&format!("/sessions/{id}/params"), json!({})).await;
    assert_eq!(same.body["invalidated"], json!([]));
}

fn schedule_oracle(m: &[f64], window: (usize, usize), a_min: f64, a_max: f64) -> Vec<(f64, f64)> {
    let w = &m[window.0..=window.1];
    let lo = w.iter().cloned().fold(f64::MAX, f64::min);
    let hi = w.iter().cloned().fold(f64::MIN, f64::max);
    m.iter()
        .map(|&x| {
            let s = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            let a = a_min + s * (a_max - a_min);
            (a, x * (1.0 - a) / a)
        })
        .collect()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[tokio::test]
async fn window_change_only_rederives_the_schedule() {
    let c = Client::new(ServiceOptions::default());
    let created = c.post("/sessions", weekly(json!({ "k": 6, "max_iter": 20, "amin": 0.3, "amax": 0.6 }))).await;
    let id = created.body["id"].as_str().unwrap().to_owned();
    let m = floats(&created.body["m_i"]);
    let n = m.len();
    let argmin = (0..n).min_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
    let argmax = (0..n).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();

    // a window still holding both extremes leaves every frame intact
    let (lo, hi) = (argmin.min(argmax), argmin.max(argmax));
    let r = c.post(&format!("/sessions/{id}/params"), json!({ "window": [lo, hi] })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(r.body["invalidated"], json!([]));

    let window = (0, 4);
    let r = c.post(&format!("/sessions/{id}/params"), json!({ "window": [window.0, window.1] })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let oracle = schedule_oracle(&m, window, 0.3, 0.6);
    let full = schedule_oracle(&m, (0, n - 1), 0.3, 0.6);
    let a_i = floats(&r.body["schedule"]["a_i"]);
    let m_b = floats(&r.body["schedule"]["m_b"]);
    for t in 0..n {
        assert!((a_i[t] - oracle[t].0).abs() < 1e-12);
        assert!((m_b[t] - oracle[t].1).abs() <= 1e-12 * oracle[t].1);
    }
    let expected: Vec<usize> = (0..n).filter(|&t| oracle[t].1 != full[t].1).collect();
    assert!(!expected.is_empty());
    assert_eq!(r.body["invalidated"], json!(expected));
    assert_eq!(r.body["params"]["k"], 6, "other parameters are kept");
}

#[tokio::test]
async fn half_fraction_is_the_vertex_midpoint() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(weekly(fast())).await;
    let pending = c.get(&format!("/sessions/{id}/frames/3?u=0.5")).await;
    assert!(pending.status == StatusCode::ACCEPTED || pending.status == StatusCode::OK);
    c.wait(&id);
    let a = coords(&c.frame(&id, 3).await["geojson"]);
    let b = coords(&c.frame(&id, 4).await["geojson"]);
    let r = c.get(&format!("/sessions/{id}/frames/3?u=0.5")).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(r.body["u"], 0.5);
    let mid = coords(&r.body["geojson"]);
    assert_eq!(mid.len(), a.len());
    for i in 0..a.len() {
        let want = 0.5 * (a[i] + b[i]);
        assert!((mid[i] - want).abs() <= 1e-9 * (1.0 + want.abs()), "coordinate {i}: {} vs {want}", mid[i]);
    }
    let m = floats(&c.get(&format!("/sessions/{id}/series")).await.body["m_i"]);
    assert!((r.body["m_i"].as_f64().unwrap() - 0.5 * (m[3] + m[4])).abs() < 1e-6);
    assert!(r.body["report"]["epsilon"].is_number());
}

#[tokio::test]
async fn frame_requests_are_validated() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(weekly(fast())).await;
    assert_eq!(c.get(&format!("/sessions/{id}/frames/20")).await.status, StatusCode::NOT_FOUND);
    assert_eq!(c.get(&format!("/sessions/{id}/frames/2?u=1.5")).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.get(&format!("/sessions/{id}/frames/2?u=abc")).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.get(&format!("/sessions/{id}/frames/19?u=0.5")).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.get(&format!("/sessions/{id}/frames/x")).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(c.get("/sessions/missing/series").await.status, StatusCode::NOT_FOUND);
    let r = c.get(&format!("/sessions/{id}/frames/2?u=-0.1")).await;
    assert_eq!(r.body["code"], "invalid_parameter");
}

#[tokio::test]
async fn playhead_moves_and_pending_work_starts_near_it() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(weekly(fast())).await;
    let r = c.get(&format!("/sessions/{id}/frames/15?u=0.25")).await;
    assert!(r.status == StatusCode::ACCEPTED || r.status == StatusCode::OK);
    let s = c.get(&format!("/sessions/{id}/status")).await.body;
    assert_eq!(s["playhead"], json!({ "t": 15, "u": 0.25 }));
    // frames 15 and 16 are the nearest and must finish before the far end
    let deadline = Instant::now() + Duration::from_secs(300);
    loop {
        let s = c.get(&format!("/sessions/{id}/status")).await.body;
        let f = s["frames"].as_array().unwrap();
        if f[15] == "done" && f[16] == "done" {
            // only the frame already in flight at creation may have finished besides them
            let others = (0..f.len()).filter(|&t| t != 15 && t != 16 && f[t] == "done").collect::<Vec<_>>();
            assert!(others.is_empty() || others == [0], "far frames computed first: {f:?}");
            break;
        }
        assert!(Instant::now() < deadline);
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

#[tokio::test]
async fn frame_metrics_match_the_metrics_command() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(france(json!({ "k": 7 }))).await;
    c.wait(&id);
    let frame = c.frame(&id, 0).await;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frame.geojson");
    std::fs::write(&path, frame["geojson"].to_string()).unwrap();
    let config = RunConfig {
        map: Some(data("france.geojson")),
        key: Some("population".into()),
        carto: Some(path),
        texture_k: 7,
        max_iter: 0,
        ..RunConfig::default()
    };
    let report = score_files(&config).unwrap();
    let served = &frame["report"];
    for (name, value) in [("epsilon", report.epsilon), ("xi", report.xi), ("tau", report.tau), ("hamming_avg", report.hamming_avg), ("hamming_max", report.hamming_max), ("R", report.r)] {
        let s = served[name].as_f64().unwrap();
        assert!((s - value).abs() < 1e-9, "{name}: served {s}, metrics {value}");
    }
}

#[tokio::test]
async fn series_holds_the_schedule_identity_and_both_timings() {
    let c = Client::new(ServiceOptions::default());
    let id = c.create(weekly(json!({ "k": 6, "max_iter": 20, "amin": 0.25, "amax": 0.55 }))).await;
    c.wait(&id);
    let direct = c.get(&format!("/sessions/{id}/series")).await.body;
    assert!(direct["timing"]["direct"].is_array());
    assert!(direct["timing"].get("cumulative").is_none());

    let r = c.post(&format!("/sessions/{id}/params"), json!({ "strategy": "cumulative" })).await;
    assert_eq!(r.status, StatusCode::OK);
    c.wait(&id);
    let s = c.get(&format!("/sessions/{id}/series")).await.body;
    let m = floats(&s["m_i"]);
    let a = floats(&s["schedule"]["a_i"]);
    let b = floats(&s["schedule"]["m_b"]);
    for t in 0..m.len() {
        assert!((b[t] - m[t] * (1.0 - a[t]) / a[t]).abs() <= 1e-12 * b[t]);
        assert!((0.25..=0.55).contains(&a[t]));
    }
    for strategy in ["direct", "cumulative"] {
        let ms = s["timing"][strategy].as_array().unwrap();
        assert_eq!(ms.len(), m.len());
        assert!(ms.iter().all(|x| x.as_f64().is_some_and(|v| v > 0.0)), "{strategy}: {ms:?}");
    }
    let frames = s["frames"].as_array().unwrap();
    assert!(frames.iter().all(|f| f["status"] == "done" && f["epsilon"].is_number()));
}

#[tokio::test]
async fn constant_series_is_flat() {
    let csv = read("germany_population.csv");
    let mut out = String::from("id,a,b,c\n");
    for line in csv.lines().skip(1) {
        let (id, v) = line.split_once(',').unwrap();
        out.push_str(&format!("{id},{v},{v},{v}\n"));
    }
    let c = Client::new(ServiceOptions::default());
    let id = c.create(json!({ "map": read("germany.geojson"), "stats": out, "params": { "k": 6, "max_iter": 20, "amin": 0.3, "amax": 0.6 } })).await;
    c.wait(&id);
    let s = c.get(&format!("/sessions/{id}/series")).await.body;
    let m = floats(&s["m_i"]);
    assert!(m.iter().all(|&x| x == m[0]));
    assert!(floats(&s["schedule"]["a_i"]).iter().all(|&x| x == 0.6));
    let eps: Vec<f64> = s["frames"].as_array().unwrap().iter().map(|f| f["epsilon"].as_f64().unwrap()).collect();
    assert!(eps.iter().all(|&e| e == eps[0]));
    let a = c.frame(&id, 0).await;
    let b = c.frame(&id, 2).await;
    assert_eq!(a["geojson"], b["geojson"]);
}

#[tokio::test]
async fn persisted_sessions_come_back_with_their_frames() {
    let dir = tempfile::tempdir().unwrap();
    let options = ServiceOptions { persist_dir: Some(dir.path().to_owned()), static_dir: None };
    let (id, etag, text) = {
        let c = Client::new(options.clone());
        let id = c.create(france(fast())).await;
        c.wait(&id);
        let r = c.get(&format!("/sessions/{id}/frames/0")).await;
        (id, r.etag.unwrap(), r.text)
    };
    let c = Client::new(options);
    let s = c.get(&format!("/sessions/{id}/status")).await;
    assert_eq!(s.status, StatusCode::OK, "{}", s.text);
    assert_eq!(s.body["counts"]["done"], 1);
    let r = c.get(&format!("/sessions/{id}/frames/0")).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.etag.unwrap(), etag);
    assert_eq!(r.text, text);
}

#[tokio::test]
async fn static_assets_are_served() {
    let site = tempfile::tempdir().unwrap();
    std::fs::write(site.path().join("index.html"), "<!doctype html><title>steer</title>").unwrap();
    let c = Client::new(ServiceOptions { static_dir: Some(site.path().to_owned()), persist_dir: None });
    let ramp = c.get("/assets/color_ramp.json").await;
    assert_eq!(ramp.status, StatusCode::OK);
    let bundled: Value = serde_json::from_str(&std::fs::read_to_string(data("../assets/color_ramp.json")).unwrap()).unwrap();
    assert_eq!(ramp.body, bundled);
    let spec = c.get("/openapi.yaml").await;
    assert!(spec.text.starts_with("openapi:"));
    for path in ["/sessions", "/sessions/{id}/params", "/sessions/{id}/frames/{t}", "/sessions/{id}/series", "/sessions/{id}/status"] {
        assert!(spec.text.contains(&format!("  {path}:")), "{path} undocumented");
    }
    let index = c.get("/index.html").await;
    assert_eq!(index.status, StatusCode::OK);
    assert!(index.text.contains("steer"));

    let bare = Client::new(ServiceOptions::default());
    let missing = bare.get("/nothing-here").await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);
    assert_eq!(missing.body["code"], "not_found");
}
