//! Time-varying cartogram sequences.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{BdvPolicy, Engine, RunOutcome, StopReason, StoppingCriteria};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geo::{MapModel, Point};
use crate::metrics::{full_report, QualityReport, ReportOptions};
use crate::raster::DEFAULT_K;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub map: MapModel,
    pub times: Vec<String>,
    /// `statistics[t][region]`.
    pub statistics: Vec<Vec<f64>>,
    pub m_i: Vec<f64>,
}

impl TimeSeriesDataset {
    pub fn new(map: MapModel, times: Vec<String>, statistics: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != statistics.len() {
            return Err(Error::SizeMismatch { expected: times.len(), actual: statistics.len() });
        }
        for (t, row) in statistics.iter().enumerate() {
            if row.len() != map.regions.len() {
                return Err(Error::SizeMismatch { expected: map.regions.len(), actual: row.len() });
            }
            for (r, &v) in row.iter().enumerate() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonPositiveStatistic { id: format!("{}@{}", map.regions[r].id, times[t]), value: v });
                }
            }
        }
        let m_i = statistics.iter().map(|row| row.iter().sum()).collect();
        Ok(TimeSeriesDataset { map, times, statistics, m_i })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The dataset's map carrying the statistics of time step `t`.
    pub fn map_at(&self, t: usize) -> Result<MapModel> {
        self.map.with_statistics(&self.statistics[t])
    }

    /// Same statistics, different geometry (e.g. after normalization).
    pub fn with_map(&self, map: MapModel) -> Result<Self> {
        TimeSeriesDataset::new(map, self.times.clone(), self.statistics.clone())
    }
}

/// Target share of the domain held by the map, interpolated between
/// `a_min` and `a_max` by the total statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaFractionPolicy {
    pub a_min: f64,
    pub a_max: f64,
    /// Inclusive time-index window used to find `M_min` and `M_max`.
    #[serde(default)]
    pub window: Option<(usize, usize)>,
}

impl AreaFractionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.a_min && self.a_min < self.a_max && self.a_max < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "area fractions must satisfy 0 < a_min < a_max < 1, got {} and {}",
                self.a_min, self.a_max
            )));
        }
        if let Some((a, b)) = self.window {
            if a > b {
                return Err(Error::InvalidParameter(format!("window start {a} is after its end {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub m_i: f64,
    pub m_b: f64,
    pub a_i: f64,
    pub w: f64,
}

/// Area fraction and background mass for one total, given the window's extremes.
pub fn schedule_entry(m_i: f64, m_min: f64, m_max: f64, policy: &AreaFractionPolicy) -> ScheduleEntry {
    let w = if m_max > m_min { ((m_i - m_min) / (m_max - m_min)).clamp(0.0, 1.0) } else { 1.0 };
    let a_i = (1.0 - w) * policy.a_min + w * policy.a_max;
    let m_b = m_i * (1.0 - a_i) / a_i;
    ScheduleEntry { m_i, m_b, a_i, w }
}

pub fn background_mass_schedule(dataset: &TimeSeriesDataset, policy: &AreaFractionPolicy) -> Result<Vec<ScheduleEntry>> {
    policy.validate()?;
    let n = dataset.len();
    let (t0, t1) = policy.window.unwrap_or((0, n.saturating_sub(1)));
    if t1 >= n {
        return Err(Error::InvalidParameter(format!("window end {t1} is past the last time index {}", n - 1)));
    }
    let slice = &dataset.m_i[t0..=t1];
    let m_min = slice.iter().copied().fold(f64::INFINITY, f64::min);
    let m_max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m_max == m_min {
        log::info!("total statistic is constant over the window; using a_max throughout");
    }
    Ok(dataset.m_i.iter().map(|&m| schedule_entry(m, m_min, m_max, policy)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Direct,
    Cumulative,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Strategy::Direct),
            "cumulative" => Ok(Strategy::Cumulative),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalConfig {
    pub k: u32,
    pub criteria: StoppingCriteria,
    /// Used when no area-fraction policy is given.
    pub bdv_multiplier: f64,
    pub policy: Option<AreaFractionPolicy>,
    pub report: ReportOptions,
    /// Average shape distortion above which a frame is flagged.
    pub watchdog_ceiling: f64,
    /// Passes inside one frame.
    pub exec: Exec,
    /// Across frames (direct strategy only).
    pub frame_exec: Exec,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            k: DEFAULT_K,
            criteria: StoppingCriteria::default(),
            bdv_multiplier: 1.0,
            policy: None,
            report: ReportOptions::default(),
            watchdog_ceiling: 0.5,
            exec: Exec::default(),
            frame_exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: String,
    pub map: Option<MapModel>,
    pub report: Option<QualityReport>,
    pub schedule: Option<ScheduleEntry>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub millis: f64,
    pub flagged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub strategy: Strategy,
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn mean_millis(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().map(|f| f.millis).sum::<f64>() / self.frames.len() as f64
    }

    pub fn maps(&self) -> Result<Vec<&MapModel>> {
        self.frames
            .iter()
            .map(|f| {
                f.map.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(format!("frame {} failed: {}", f.time, f.error.as_deref().unwrap_or("unknown")))
                })
            })
            .collect()
    }
}

fn policy_for(config: &TemporalConfig, schedule: Option<&ScheduleEntry>) -> BdvPolicy {
    match schedule {
        Some(s) => BdvPolicy::BackgroundMass { mass: s.m_b },
        None => BdvPolicy::FixedMass { multiplier: config.bdv_multiplier },
    }
}

/// Computes single frames of a series; shared by the batch strategies and
/// by callers that schedule frames themselves.
pub struct FrameRunner<'a> {
    dataset: &'a TimeSeriesDataset,
    config: &'a TemporalConfig,
    engine: Engine,
    schedule: Option<Vec<ScheduleEntry>>,
}

impl<'a> FrameRunner<'a> {
    pub fn new(dataset: &'a TimeSeriesDataset, config: &'a TemporalConfig) -> Result<Self> {
        config.criteria.validate()?;
        let engine = Engine::new(config.k, config.exec)?;
        let schedule = config.policy.as_ref().map(|p| background_mass_schedule(dataset, p)).transpose()?;
        Ok(FrameRunner { dataset, config, engine, schedule })
    }

    pub fn schedule(&self) -> Option<&[ScheduleEntry]> {
        self.schedule.as_deref()
    }

    /// Frame `t` deformed from `start`. Failures are recorded in the frame.
    pub fn compute(&self, t: usize, start: &MapModel) -> Frame {
        let began = Instant::now();
        let sched = self.schedule.as_ref().map(|s| s[t]);
        let frame = |map, report, iterations, stop, error: Option<String>| Frame {
            time: self.dataset.times[t].clone(),
            map,
            report,
            schedule: sched,
            iterations,
            stop,
            millis: began.elapsed().as_secs_f64() * 1e3,
            flagged: false,
            error,
        };
        let attempt = || -> Result<(RunOutcome, QualityReport)> {
            let start = start.with_statistics(&self.dataset.statistics[t])?;
            let policy = policy_for(self.config, sched.as_ref());
            let out = self.engine.run(&start, &self.config.criteria, &policy)?;
            let report = full_report(&self.dataset.map, &out.state.map, &self.dataset.statistics[t], &self.config.report, self.config.exec)?;
            Ok((out, report))
        };
        match attempt() {
            Ok((out, mut report)) => {
                report.millis = Some(out.total_millis);
                report.iterations = Some(out.iterations);
                frame(Some(out.state.map), Some(report), out.iterations, Some(out.stop), None)
            }
            Err(e) => {
                log::warn!("frame {} failed: {e}", self.dataset.times[t]);
                frame(None, None, 0, None, Some(e.to_string()))
            }
        }
    }

    /// Frame `t` of the direct strategy.
    pub fn direct(&self, t: usize) -> Frame {
        self.compute(t, &self.dataset.map)
    }

    /// Frame `t` of the cumulative strategy given the previous result,
    /// flagged when its average shape distortion exceeds the watchdog.
    pub fn cumulative(&self, t: usize, previous: &MapModel) -> Frame {
        let mut f = self.compute(t, previous);
        if let Some(r) = &f.report {
            if r.hamming_avg > self.config.watchdog_ceiling {
                log::warn!(
                    "frame {} average shape distortion {:.3} exceeds {:.3}",
                    f.time,
                    r.hamming_avg,
                    self.config.watchdog_ceiling
                );
                f.flagged = true;
            }
        }
        f
    }
}

/// Every frame deformed from the dataset's (normalized) map.
pub fn run_direct(dataset: &TimeSeriesDataset, config: &TemporalConfig) -> Result<FrameSequence> {
    let runner = FrameRunner::new(dataset, config)?;
    let frames = config.frame_exec.map_range(dataset.len(), |t| runner.direct(t));
    Ok(FrameSequence { strategy: Strategy::Direct, frames })
}

/// Each frame deformed from the previous frame's result.
pub fn run_cumulative(dataset: &TimeSeriesDataset, config: &TemporalConfig) -> Result<FrameSequence> {
    let runner = FrameRunner::new(dataset, config)?;
    let mut frames: Vec<Frame> = Vec::with_capacity(dataset.len());
    let mut current = dataset.map.clone();
    for t in 0..dataset.len() {
        let f = runner.cumulative(t, &current);
        if let Some(m) = &f.map {
            current = m.clone();
        }
        frames.push(f);
    }
    Ok(FrameSequence { strategy: Strategy::Cumulative, frames })
}

pub fn run_strategy(strategy: Strategy, dataset: &TimeSeriesDataset, config: &TemporalConfig) -> Result<FrameSequence> {
    match strategy {
        Strategy::Direct => run_direct(dataset, config),
        Strategy::Cumulative => run_cumulative(dataset, config),
    }
}

/// Vertex-wise linear blend of two maps with identical structure.
pub fn interpolate_pair(a: &MapModel, b: &MapModel, u: f64) -> Result<MapModel> {
    let va = a.vertices();
    let vb = b.vertices();
    if va.len() != vb.len() {
        return Err(Error::VertexCountMismatch { a: va.len(), b: vb.len() });
    }
    let blended: Vec<Point> = va.iter().zip(&vb).map(|(p, q)| p.lerp(*q, u)).collect();
    let mut out = a.clone();
    out.set_vertices(&blended)?;
    Ok(out)
}

/// `(T - 1) * frames_per_step + 1` maps, linearly interpolated between
/// consecutive frames.
pub fn interpolate_frames(maps: &[&MapModel], frames_per_step: usize) -> Result<Vec<MapModel>> {
    if frames_per_step == 0 {
        return Err(Error::InvalidParameter("frames per step must be at least 1".into()));
    }
    let mut out = Vec::new();
    for pair in maps.windows(2) {
        for m in 0..frames_per_step {
            out.push(interpolate_pair(pair[0], pair[1], m as f64 / frames_per_step as f64)?);
        }
    }
    if let Some(last) = maps.last() {
        out.push((*last).clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub time: String,
    pub file: Option<String>,
    pub m_i: f64,
    pub m_b: Option<f64>,
    pub a_i: Option<f64>,
    pub epsilon: Option<f64>,
    pub xi: Option<f64>,
    pub tau: Option<f64>,
    pub hamming_avg: Option<f64>,
    pub hamming_max: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub millis: Option<f64>,
    pub flagged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub strategy: Strategy,
    pub frames_per_step: usize,
    pub times: Vec<String>,
    pub m_i: Vec<f64>,
    pub frames: Vec<ManifestFrame>,
}

impl Manifest {
    pub fn new(seq: &FrameSequence, dataset: &TimeSeriesDataset, frames_per_step: usize, files: &[Option<String>]) -> Self {
        let frames = seq
            .frames
            .iter()
            .enumerate()
            .map(|(t, f)| {
                let r = f.report.as_ref();
                ManifestFrame {
                    time: f.time.clone(),
                    file: files.get(t).cloned().flatten(),
                    m_i: dataset.m_i[t],
                    m_b: f.schedule.map(|s| s.m_b),
                    a_i: f.schedule.map(|s| s.a_i),
                    epsilon: r.map(|r| r.epsilon),
                    xi: r.map(|r| r.xi),
                    tau: r.map(|r| r.tau),
                    hamming_avg: r.map(|r| r.hamming_avg),
                    hamming_max: r.map(|r| r.hamming_max),
                    r: r.map(|r| r.r),
                    iterations: f.iterations,
                    stop: f.stop,
                    millis: Some(f.millis),
                    flagged: f.flagged,
                    error: f.error.clone(),
                }
            })
            .collect();
        Manifest { strategy: seq.strategy, frames_per_step, times: dataset.times.clone(), m_i: dataset.m_i.clone(), frames }
    }

    /// Drops wall-clock timings so the manifest is reproducible.
    pub fn without_timings(mut self) -> Self {
        for f in &mut self.frames {
            f.millis = None;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Polygon, Region};

    fn point_map(p: Point) -> MapModel {
        MapModel::new(vec![Region {
            id: "a".into(),
            name: "a".into(),
            polygons: vec![Polygon {
                exterior: vec![p, Point::new(p.x + 0.1, p.y), Point::new(p.x, p.y + 0.1)],
                holes: vec![],
            }],
            statistic: 1.0,
        }])
    }

    fn totals(m: &[f64]) -> TimeSeriesDataset {
        let map = point_map(Point::new(0.0, 0.0));
        TimeSeriesDataset::new(map, (0..m.len()).map(|t| t.to_string()).collect(), m.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let ds = totals(&[100.0, 200.0, 300.0]);
        let policy = AreaFractionPolicy { a_min: 0.1, a_max: 0.9, window: None };
        let s = background_mass_schedule(&ds, &policy).unwrap();
        assert_eq!(s[0].a_i, 0.1);
        assert_eq!(s[2].a_i, 0.9);
        assert!((s[1].w - 0.5).abs() < 1e-15 && (s[1].a_i - 0.5).abs() < 1e-15);
        assert!((s[1].m_b - 200.0).abs() < 1e-12);
    }

    #[test]
    fn constant_totals_use_a_max() {
        let ds = totals(&[5.0, 5.0]);
        let s = background_mass_schedule(&ds, &AreaFractionPolicy { a_min: 0.2, a_max: 0.8, window: None }).unwrap();
        assert!(s.iter().all(|e| e.w == 1.0 && e.a_i == 0.8));
    }

    #[test]
    fn window_outside_values_clamp() {
        let ds = totals(&[50.0, 100.0, 300.0, 400.0]);
        let p = AreaFractionPolicy { a_min: 0.3, a_max: 0.6, window: Some((1, 2)) };
        let s = background_mass_schedule(&ds, &p).unwrap();
        assert_eq!((s[0].a_i, s[3].a_i), (0.3, 0.6));
        let bad = AreaFractionPolicy { a_min: 0.6, a_max: 0.6, window: None };
        assert!(background_mass_schedule(&ds, &bad).is_err());
        let past = AreaFractionPolicy { window: Some((0, 9)), ..p };
        assert!(background_mass_schedule(&ds, &past).is_err());
    }

    #[test]
    fn interpolation_counts_and_midpoint() {
        let a = point_map(Point::new(0.0, 0.0));
        let b = point_map(Point::new(1.0, 1.0));
        let out = interpolate_frames(&[&a, &b], 10).unwrap();
        assert_eq!(out.len(), 11);
        assert_eq!(out[5].regions[0].polygons[0].exterior[0], Point::new(0.5, 0.5));
        assert_eq!(interpolate_frames(&[&a, &b], 1).unwrap(), vec![a.clone(), b.clone()]);
        assert!(interpolate_frames(&[&a, &b], 0).is_err());
    }

    #[test]
    fn interpolation_rejects_mismatched_frames() {
        let a = point_map(Point::new(0.0, 0.0));
        let mut b = a.clone();
        b.regions[0].polygons[0].exterior.push(Point::new(0.05, 0.2));
        assert!(matches!(interpolate_pair(&a, &b, 0.5), Err(Error::VertexCountMismatch { .. })));
    }

    #[test]
    fn dataset_totals() {
        let ds = totals(&[1.5, 2.5]);
        assert_eq!(ds.m_i, vec![1.5, 2.5]);
        assert!(TimeSeriesDataset::new(ds.map.clone(), vec!["a".into()], vec![vec![0.0]]).is_err());
    }
}
