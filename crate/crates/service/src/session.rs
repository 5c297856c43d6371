//! Steering sessions: one dataset, the current parameters, and a cache of
//! computed frames keyed by content hashes.
//!
//! A frame's key is a hash of the dataset and of every parameter that can
//! change its geometry, so a cached frame is never stale and reverting a
//! parameter serves earlier results again. A background worker computes
//! missing frames of the current parameter set, one at a time, without
//! holding the session lock.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use cartogram::commands::{as_series, geojson_string, region_properties, RunConfig};
use cartogram::geo::CoordinateFrame;
use cartogram::metrics::full_report;
use cartogram::temporal::{background_mass_schedule, interpolate_pair, Frame, FrameRunner, ScheduleEntry, Strategy, TemporalConfig, TimeSeriesDataset};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ApiResult};

fn sha(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn sha_json(v: &Value) -> String {
    sha(&[v.to_string().as_bytes()])
}

/// Steerable parameters. Every field has a default, and updates are
/// merged field by field onto the current set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Texture side is 2^k pixels.
    pub k: u32,
    pub scale: f64,
    /// Background density multiplier, used when no area fractions are set.
    pub bdv_multiplier: f64,
    pub amin: Option<f64>,
    pub amax: Option<f64>,
    pub window: Option<(usize, usize)>,
    pub threshold: f64,
    pub stagnation: usize,
    pub max_iter: usize,
    pub strategy: Strategy,
    pub watchdog_ceiling: f64,
}

impl Default for Params {
    fn default() -> Self {
        let c = RunConfig::default();
        Params {
            k: c.texture_k,
            scale: c.scale,
            bdv_multiplier: c.bdv_multiplier,
            amin: c.amin,
            amax: c.amax,
            window: c.window,
            threshold: c.threshold,
            stagnation: c.stagnation,
            max_iter: c.max_iter,
            strategy: c.strategy,
            watchdog_ceiling: c.watchdog_ceiling,
        }
    }
}

impl Params {
    pub fn config(&self, inputs: &Inputs) -> RunConfig {
        RunConfig {
            key: inputs.key.clone(),
            id_column: inputs.id_column.clone(),
            time_column: inputs.time_column.clone(),
            texture_k: self.k,
            scale: self.scale,
            bdv_multiplier: self.bdv_multiplier,
            amin: self.amin,
            amax: self.amax,
            window: self.window,
            threshold: self.threshold,
            stagnation: self.stagnation,
            max_iter: self.max_iter,
            strategy: self.strategy,
            watchdog_ceiling: self.watchdog_ceiling,
            ..RunConfig::default()
        }
    }

    pub fn hash(&self) -> String {
        sha_json(&serde_json::to_value(self).expect("params serialize"))
    }

    /// `self` with the fields of `patch` replaced.
    pub fn merged(&self, patch: &Value) -> ApiResult<Params> {
        let patch = patch.as_object().ok_or_else(|| ApiError::bad_request("parameters must be a JSON object"))?;
        let mut v = serde_json::to_value(self).expect("params serialize");
        let obj = v.as_object_mut().expect("params are an object");
        for (k, x) in patch {
            obj.insert(k.clone(), x.clone());
        }
        serde_json::from_value(v).map_err(|e| ApiError::bad_request(e.to_string()))
    }
}

/// Uploaded files and the options that say how to read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    /// GeoJSON text.
    pub map: String,
    /// CSV text joined by `id_column`.
    pub stats: Option<String>,
    pub key: Option<String>,
    pub id_column: String,
    pub time_column: Option<String>,
}

impl Inputs {
    pub fn hash(&self) -> String {
        let opt = |s: &Option<String>| s.clone().unwrap_or_default();
        sha(&[
            self.map.as_bytes(),
            &[self.stats.is_some() as u8],
            opt(&self.stats).as_bytes(),
            &[self.key.is_some() as u8],
            opt(&self.key).as_bytes(),
            self.id_column.as_bytes(),
            &[self.time_column.is_some() as u8],
            opt(&self.time_column).as_bytes(),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStatus {
    Pending,
    Running,
    Done,
    Failed,
}

const STRATEGIES: [Strategy; 2] = [Strategy::Direct, Strategy::Cumulative];

fn strategy_index(s: Strategy) -> usize {
    match s {
        Strategy::Direct => 0,
        Strategy::Cumulative => 1,
    }
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Direct => "direct",
        Strategy::Cumulative => "cumulative",
    }
}

/// Everything derived from the dataset and the current parameters.
struct Prepared {
    prep_key: String,
    dataset: Arc<TimeSeriesDataset>,
    temporal: Arc<TemporalConfig>,
    schedule: Option<Vec<ScheduleEntry>>,
    /// Frame keys per strategy.
    keys: [Vec<String>; 2],
}

fn prep_key(dataset_hash: &str, p: &Params) -> String {
    // zero-iteration runs skip densification
    sha_json(&json!({ "dataset": dataset_hash, "k": p.k, "scale": p.scale, "densify": p.max_iter > 0 }))
}

fn frame_keys(prep_key: &str, p: &Params, schedule: Option<&[ScheduleEntry]>, n: usize, strategy: Strategy) -> Vec<String> {
    let engine = sha_json(&json!({
        "prep": prep_key,
        "threshold": p.threshold,
        "stagnation": p.stagnation,
        "max_iter": p.max_iter,
        "strategy": strategy_name(strategy),
    }));
    let mass = |t: usize| match schedule {
        Some(s) => json!({ "m_b": s[t].m_b }),
        None => json!({ "multiplier": p.bdv_multiplier }),
    };
    let mut keys: Vec<String> = Vec::with_capacity(n);
    for t in 0..n {
        let key = match strategy {
            Strategy::Direct => sha_json(&json!({ "engine": engine, "t": t, "mass": mass(t) })),
            Strategy::Cumulative => {
                let prev = if t == 0 { Value::Null } else { Value::String(keys[t - 1].clone()) };
                sha_json(&json!({ "engine": engine, "t": t, "mass": mass(t), "prev": prev, "watchdog": p.watchdog_ceiling }))
            }
        };
        keys.push(key);
    }
    keys
}

fn prepare(raw: &TimeSeriesDataset, dataset_hash: &str, inputs: &Inputs, p: &Params, reuse: Option<&Prepared>) -> ApiResult<Prepared> {
    let cfg = p.config(inputs);
    cfg.validate().map_err(ApiError::from_params)?;
    let pk = prep_key(dataset_hash, p);
    let dataset = match reuse {
        Some(r) if r.prep_key == pk => r.dataset.clone(),
        _ => Arc::new(cfg.prepare_series(raw).map_err(|e| ApiError::invalid_input(&e))?),
    };
    let temporal = cfg.temporal().map_err(ApiError::from_params)?;
    let schedule = temporal.policy.as_ref().map(|pol| background_mass_schedule(&dataset, pol)).transpose().map_err(ApiError::from_params)?;
    let n = dataset.len();
    let keys = STRATEGIES.map(|s| frame_keys(&pk, p, schedule.as_deref(), n, s));
    Ok(Prepared { prep_key: pk, dataset, temporal: Arc::new(temporal), schedule, keys })
}

struct State {
    inputs: Inputs,
    dataset_hash: String,
    raw: TimeSeriesDataset,
    params: Params,
    params_hash: String,
    playhead: (usize, f64),
    prepared: Prepared,
    cache: HashMap<String, Arc<Frame>>,
    running: Option<String>,
    worker_active: bool,
}

impl State {
    fn keys(&self) -> &[String] {
        &self.prepared.keys[strategy_index(self.params.strategy)]
    }

    fn status_of(&self, key: &str) -> FrameStatus {
        match self.cache.get(key) {
            Some(f) if f.error.is_some() => FrameStatus::Failed,
            Some(_) => FrameStatus::Done,
            None if self.running.as_deref() == Some(key) => FrameStatus::Running,
            None => FrameStatus::Pending,
        }
    }

    fn statuses(&self) -> Vec<FrameStatus> {
        self.keys().iter().map(|k| self.status_of(k)).collect()
    }

    fn next_job(&self) -> Option<Job> {
        let keys = self.keys();
        let missing = |t: &usize| !self.cache.contains_key(&keys[*t]);
        let p = &self.prepared;
        let (t, start) = match self.params.strategy {
            Strategy::Direct => {
                let at = self.playhead.0 as f64 + self.playhead.1;
                let t = (0..keys.len()).filter(missing).min_by(|&a, &b| (a as f64 - at).abs().total_cmp(&(b as f64 - at).abs()).then(a.cmp(&b)))?;
                (t, None)
            }
            Strategy::Cumulative => {
                let t = (0..keys.len()).find(missing)?;
                let previous = (0..t).rev().find_map(|j| self.cache.get(&keys[j]).and_then(|f| f.map.clone()));
                (t, Some(previous.unwrap_or_else(|| p.dataset.map.clone())))
            }
        };
        Some(Job { key: keys[t].clone(), t, start, dataset: p.dataset.clone(), temporal: p.temporal.clone() })
    }
}

struct Job {
    key: String,
    t: usize,
    /// Present for the cumulative strategy.
    start: Option<cartogram::geo::MapModel>,
    dataset: Arc<TimeSeriesDataset>,
    temporal: Arc<TemporalConfig>,
}

impl Job {
    fn run(self) -> (String, Frame) {
        let frame = match FrameRunner::new(&self.dataset, &self.temporal) {
            Ok(runner) => match &self.start {
                Some(prev) => runner.cumulative(self.t, prev),
                None => runner.direct(self.t),
            },
            Err(e) => Frame {
                time: self.dataset.times[self.t].clone(),
                map: None,
                report: None,
                schedule: None,
                iterations: 0,
                stop: None,
                millis: 0.0,
                flagged: false,
                error: Some(e.to_string()),
            },
        };
        (self.key, frame)
    }
}

struct Shared {
    id: String,
    state: Mutex<State>,
    changed: Condvar,
    persist: Option<PathBuf>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SavedSession {
    id: String,
    inputs: Inputs,
    params: Params,
    playhead: (usize, f64),
}

/// Result of a frame request.
pub enum FrameReply {
    /// Not computed yet; the statuses of the frames the reply needs.
    Pending(Value),
    Ready { etag: String, body: Value },
}

/// Handle to one session; cheap to clone.
#[derive(Clone)]
pub struct Session {
    shared: Arc<Shared>,
}

impl Session {
    /// Parses and prepares the uploads. Invalid parameters give 400,
    /// unreadable uploads 422.
    pub fn create(id: String, inputs: Inputs, params: Params, persist: Option<&Path>) -> ApiResult<Session> {
        let cfg = params.config(&inputs);
        cfg.validate().map_err(ApiError::from_params)?;
        let attached = cfg.parse_inputs(inputs.map.as_bytes(), inputs.stats.as_deref().map(str::as_bytes)).map_err(|e| ApiError::invalid_input(&e))?;
        let raw = as_series(attached).map_err(|e| ApiError::invalid_input(&e))?;
        let dataset_hash = inputs.hash();
        let prepared = prepare(&raw, &dataset_hash, &inputs, &params, None)?;
        let state = State {
            params_hash: params.hash(),
            inputs,
            dataset_hash,
            raw,
            params,
            playhead: (0, 0.0),
            prepared,
            cache: HashMap::new(),
            running: None,
            worker_active: false,
        };
        let session = Session {
            shared: Arc::new(Shared { id: id.clone(), state: Mutex::new(state), changed: Condvar::new(), persist: persist.map(|p| p.join(&id)) }),
        };
        session.save_session();
        session.kick();
        Ok(session)
    }

    /// Reloads a session saved under `dir`, including its computed frames.
    pub fn restore(dir: &Path) -> Result<Session, String> {
        let text = std::fs::read_to_string(dir.join("session.json")).map_err(|e| e.to_string())?;
        let saved: SavedSession = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let parent = dir.parent().ok_or("session directory has no parent")?;
        let session = Session::create(saved.id, saved.inputs, saved.params, Some(parent)).map_err(|e| e.message)?;
        {
            let mut st = session.shared.lock();
            st.playhead = saved.playhead;
            if let Ok(entries) = std::fs::read_dir(dir.join("frames")) {
                for entry in entries.flatten() {
                    let path = entry.path();
                    let Some(key) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else { continue };
                    match std::fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| serde_json::from_str::<Frame>(&t).map_err(|e| e.to_string())) {
                        Ok(f) => {
                            st.cache.insert(key, Arc::new(f));
                        }
                        Err(e) => log::warn!("skipping frame {}: {e}", path.display()),
                    }
                }
            }
        }
        session.kick();
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.shared.id
    }

    fn save_session(&self) {
        let Some(dir) = &self.shared.persist else { return };
        let saved = {
            let st = self.shared.lock();
            SavedSession { id: self.shared.id.clone(), inputs: st.inputs.clone(), params: st.params.clone(), playhead: st.playhead }
        };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir.join("frames"))?;
            std::fs::write(dir.join("session.json"), serde_json::to_string(&saved)?)
        };
        if let Err(e) = write() {
            log::warn!("cannot persist session {}: {e}", self.shared.id);
        }
    }

    fn save_frame(&self, key: &str, frame: &Frame) {
        let Some(dir) = &self.shared.persist else { return };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir.join("frames"))?;
            std::fs::write(dir.join("frames").join(format!("{key}.json")), serde_json::to_string(frame)?)
        };
        if let Err(e) = write() {
            log::warn!("cannot persist frame {key}: {e}");
        }
    }

    /// Starts the worker thread unless one is running.
    fn kick(&self) {
        let mut st = self.shared.lock();
        if st.worker_active || st.next_job().is_none() {
            return;
        }
        st.worker_active = true;
        drop(st);
        let me = self.clone();
        std::thread::spawn(move || me.work());
    }

    fn work(self) {
        loop {
            let job = {
                let mut st = self.shared.lock();
                match st.next_job() {
                    Some(job) => {
                        st.running = Some(job.key.clone());
                        job
                    }
                    None => {
                        st.worker_active = false;
                        st.running = None;
                        self.shared.changed.notify_all();
                        return;
                    }
                }
            };
            log::debug!("session {}: computing frame {}", self.shared.id, job.t);
            let (key, frame) = job.run();
            self.save_frame(&key, &frame);
            let mut st = self.shared.lock();
            st.cache.insert(key, Arc::new(frame));
            st.running = None;
            self.shared.changed.notify_all();
        }
    }

    /// Blocks until no frame of the current parameters is missing, or the
    /// timeout passes. Returns whether the session went idle.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut st = self.shared.lock();
        loop {
            if !st.worker_active && st.next_job().is_none() {
                return true;
            }
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            st = self.shared.changed.wait_timeout(st, deadline - now).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    /// Summary returned on creation.
    pub fn summary(&self) -> Value {
        let st = self.shared.lock();
        let ds = &st.prepared.dataset;
        let regions: Vec<Value> = ds.map.regions.iter().enumerate().map(|(r, reg)| {
            json!({ "id": reg.id, "name": reg.name, "statistics": ds.statistics.iter().map(|row| row[r]).collect::<Vec<_>>() })
        }).collect();
        json!({
            "id": self.shared.id,
            "dataset_hash": st.dataset_hash,
            "times": ds.times,
            "m_i": ds.m_i,
            "regions": regions,
            "params": st.params,
            "params_hash": st.params_hash,
        })
    }

    fn schedule_json(schedule: Option<&[ScheduleEntry]>) -> Value {
        match schedule {
            None => Value::Null,
            Some(s) => json!({
                "m_b": s.iter().map(|e| e.m_b).collect::<Vec<_>>(),
                "a_i": s.iter().map(|e| e.a_i).collect::<Vec<_>>(),
                "w": s.iter().map(|e| e.w).collect::<Vec<_>>(),
            }),
        }
    }

    /// Merges `patch` onto the parameters. Frames whose key changed are
    /// listed as invalidated; the worker then fills them in.
    pub fn set_params(&self, patch: &Value) -> ApiResult<Value> {
        let reply = {
            let mut st = self.shared.lock();
            let params = st.params.merged(patch)?;
            let prepared = prepare(&st.raw, &st.dataset_hash, &st.inputs, &params, Some(&st.prepared))?;
            let old = st.keys().to_vec();
            let new = &prepared.keys[strategy_index(params.strategy)];
            let invalidated: Vec<usize> = old.iter().zip(new).enumerate().filter(|(_, (a, b))| a != b).map(|(t, _)| t).collect();
            st.params_hash = params.hash();
            st.params = params;
            st.prepared = prepared;
            json!({
                "params": st.params,
                "params_hash": st.params_hash,
                "invalidated": invalidated,
                "schedule": Self::schedule_json(st.prepared.schedule.as_deref()),
            })
        };
        self.save_session();
        self.kick();
        Ok(reply)
    }

    pub fn status(&self) -> Value {
        let st = self.shared.lock();
        let statuses = st.statuses();
        let count = |s: FrameStatus| statuses.iter().filter(|&&x| x == s).count();
        json!({
            "id": self.shared.id,
            "params_hash": st.params_hash,
            "strategy": st.params.strategy,
            "playhead": { "t": st.playhead.0, "u": st.playhead.1 },
            "computing": st.worker_active,
            "counts": {
                "pending": count(FrameStatus::Pending),
                "running": count(FrameStatus::Running),
                "done": count(FrameStatus::Done),
                "failed": count(FrameStatus::Failed),
            },
            "frames": statuses,
        })
    }

    /// Totals, schedule, per-frame quality and timings of the current
    /// parameters. Timings are listed for every strategy that has frames
    /// cached under otherwise identical parameters.
    pub fn series(&self) -> Value {
        let st = self.shared.lock();
        let ds = &st.prepared.dataset;
        let frames: Vec<Value> = st
            .keys()
            .iter()
            .enumerate()
            .map(|(t, k)| {
                let status = st.status_of(k);
                match st.cache.get(k).and_then(|f| f.report.as_ref().map(|r| (f, r))) {
                    Some((f, r)) => json!({
                        "t": t, "status": status, "epsilon": r.epsilon, "xi": r.xi, "tau": r.tau,
                        "hamming_avg": r.hamming_avg, "hamming_max": r.hamming_max, "R": r.r,
                        "iterations": f.iterations, "stop": f.stop, "flagged": f.flagged,
                    }),
                    None => json!({ "t": t, "status": status }),
                }
            })
            .collect();
        let mut timing = serde_json::Map::new();
        for s in STRATEGIES {
            let ms: Vec<Option<f64>> = st.prepared.keys[strategy_index(s)].iter().map(|k| st.cache.get(k).filter(|f| f.error.is_none()).map(|f| f.millis)).collect();
            if ms.iter().any(Option::is_some) {
                timing.insert(strategy_name(s).into(), json!(ms));
            }
        }
        json!({
            "params_hash": st.params_hash,
            "strategy": st.params.strategy,
            "times": ds.times,
            "m_i": ds.m_i,
            "schedule": Self::schedule_json(st.prepared.schedule.as_deref()),
            "frames": frames,
            "timing": timing,
        })
    }

    /// Frame `t`, or the blend of frames `t` and `t + 1` at fraction `u`.
    /// Moves the playhead, which reorders pending work.
    pub fn frame(&self, t: usize, u: f64) -> ApiResult<FrameReply> {
        let (keys, frames, dataset, temporal, params_hash) = {
            let mut st = self.shared.lock();
            let n = st.prepared.dataset.len();
            if t >= n {
                return Err(ApiError::not_found(format!("time index {t} is out of range 0..{n}")));
            }
            if !(0.0..1.0).contains(&u) {
                return Err(ApiError::bad_request(format!("fraction u must lie in [0, 1), got {u}")));
            }
            if u > 0.0 && t + 1 == n {
                return Err(ApiError::bad_request("the last frame cannot be interpolated forward"));
            }
            st.playhead = (t, u);
            let span = if u > 0.0 { t..t + 2 } else { t..t + 1 };
            let keys: Vec<String> = span.map(|j| st.keys()[j].clone()).collect();
            let frames: Vec<Option<Arc<Frame>>> = keys.iter().map(|k| st.cache.get(k).cloned()).collect();
            if frames.iter().any(Option::is_none) {
                let statuses: Vec<FrameStatus> = keys.iter().map(|k| st.status_of(k)).collect();
                let pending = json!({ "t": t, "u": u, "params_hash": st.params_hash, "status": statuses });
                drop(st);
                self.kick();
                return Ok(FrameReply::Pending(pending));
            }
            (keys, frames.into_iter().map(Option::unwrap).collect::<Vec<_>>(), st.prepared.dataset.clone(), st.prepared.temporal.clone(), st.params_hash.clone())
        };
        if let Some(bad) = frames.iter().find(|f| f.error.is_some()) {
            return Err(ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "frame_failed", format!("frame {} failed", bad.time))
                .with_detail(json!({ "t": t, "error": bad.error })));
        }
        let etag = sha_json(&json!({ "keys": keys, "u": u }));
        let body = if u == 0.0 { frame_body(t, &frames[0], &params_hash, dataset.m_i[t]) } else { blend_body(t, u, &frames, &dataset, &temporal, &params_hash)? };
        Ok(FrameReply::Ready { etag, body })
    }
}

fn frame_body(t: usize, f: &Frame, params_hash: &str, m_i: f64) -> Value {
    let map = f.map.as_ref().expect("done frames carry a map");
    let mut report = f.report.clone().expect("done frames carry a report");
    // timings live in the series; a frame body depends on parameters only
    report.millis = None;
    let geojson: Value = serde_json::from_str(&geojson_string(map, CoordinateFrame::Source, Some(&region_properties(&report)))).expect("valid geojson");
    json!({
        "t": t,
        "u": 0.0,
        "time": f.time,
        "params_hash": params_hash,
        "m_i": m_i,
        "m_b": f.schedule.map(|s| s.m_b),
        "a_i": f.schedule.map(|s| s.a_i),
        "iterations": f.iterations,
        "stop": f.stop,
        "flagged": f.flagged,
        "report": report,
        "geojson": geojson,
    })
}

fn blend_body(t: usize, u: f64, frames: &[Arc<Frame>], ds: &TimeSeriesDataset, cfg: &TemporalConfig, params_hash: &str) -> ApiResult<Value> {
    let (a, b) = (&frames[0], &frames[1]);
    let internal = |e: cartogram::Error| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string());
    let map = interpolate_pair(a.map.as_ref().expect("done"), b.map.as_ref().expect("done"), u).map_err(internal)?;
    let lerp = |x: f64, y: f64| (1.0 - u) * x + u * y;
    let weights: Vec<f64> = ds.statistics[t].iter().zip(&ds.statistics[t + 1]).map(|(&x, &y)| lerp(x, y)).collect();
    let report = full_report(&ds.map, &map, &weights, &cfg.report, cfg.exec).map_err(internal)?;
    let geojson: Value = serde_json::from_str(&geojson_string(&map, CoordinateFrame::Source, Some(&region_properties(&report)))).expect("valid geojson");
    let sched = a.schedule.zip(b.schedule);
    Ok(json!({
        "t": t,
        "u": u,
        "time": a.time,
        "next_time": b.time,
        "params_hash": params_hash,
        "m_i": lerp(ds.m_i[t], ds.m_i[t + 1]),
        "m_b": sched.map(|(x, y)| lerp(x.m_b, y.m_b)),
        "a_i": sched.map(|(x, y)| lerp(x.a_i, y.a_i)),
        "iterations": Value::Null,
        "stop": Value::Null,
        "flagged": a.flagged || b.flagged,
        "report": report,
        "geojson": geojson,
    }))
}
