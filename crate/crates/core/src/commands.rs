//! End-to-end commands behind the `cartogram` binary.
//!
//! Every command takes a [`RunConfig`] and writes its artifacts into
//! `out_dir`. Outputs are pure functions of the config except for the
//! files that carry wall-clock timings (`trace.csv`, `timing.json`).

use std::path::{Path, PathBuf};

use geojson::{FeatureCollection, GeoJson, JsonObject};
use serde::{Deserialize, Serialize};

use crate::engine::{write_trace_csv, BdvPolicy, Engine, RunOutcome, StopReason, StoppingCriteria};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geo::{attach_statistics, densify, normalize, parse_map, to_geojson, AttachedStatistics, CoordinateFrame, MapModel, ParseOptions, Point, StatsOptions};
use crate::io::{render_svg, write_dumps, ColorRamp, Coloring, SvgOptions};
use crate::metrics::{full_report, QualityReport, ReportOptions};
use crate::raster::{build_density, default_bdv, label_pixels, DEFAULT_K};
use crate::temporal::{interpolate_frames, run_strategy, AreaFractionPolicy, Manifest, Strategy, TemporalConfig, TimeSeriesDataset};

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Read { path: path.display().to_string(), source })
}

/// Which files a command renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Geojson,
    Svg,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn geojson(self) -> bool {
        self != OutputFormat::Svg
    }

    pub fn svg(self) -> bool {
        self != OutputFormat::Geojson
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geojson" => Ok(OutputFormat::Geojson),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::InvalidParameter(format!("unknown format {s:?}"))),
        }
    }
}

/// Frame of a cartogram file given to `cmd_metrics`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameHint {
    /// Use the `frame` member written by this tool, else source units.
    #[default]
    Auto,
    Source,
    Texture,
}

/// Complete parameter set of one command. Loaded from a single JSON
/// document; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub map: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    /// Statistic property in the GeoJSON, or value column in the CSV.
    pub key: Option<String>,
    pub id_column: String,
    /// Long-format CSV time column.
    pub time_column: Option<String>,
    pub texture_k: u32,
    pub scale: f64,
    pub bdv_multiplier: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub stagnation: usize,
    pub strategy: Strategy,
    pub amin: Option<f64>,
    pub amax: Option<f64>,
    pub window: Option<(usize, usize)>,
    pub frames_per_step: usize,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub strict: bool,
    /// Accepted for compatibility; every run is deterministic.
    pub seedless: bool,
    pub coloring: Coloring,
    /// Maximum edge length before deformation, in pixels.
    pub densify_pixels: f64,
    /// Also write the final label/density/integral-image/field textures.
    pub dump_textures: bool,
    /// Write linearly interpolated in-between frames for animations.
    pub tweens: bool,
    /// Multipliers for `sweep-bdv`; empty means 0.95..=1.05 in steps of 0.01.
    pub multipliers: Vec<f64>,
    /// Cartogram file scored by `metrics`.
    pub carto: Option<PathBuf>,
    pub carto_frame: FrameHint,
    pub watchdog_ceiling: f64,
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = StoppingCriteria::default();
        RunConfig {
            map: None,
            stats: None,
            key: None,
            id_column: "id".into(),
            time_column: None,
            texture_k: DEFAULT_K,
            scale: 0.9,
            bdv_multiplier: 1.0,
            max_iter: c.max_iterations,
            threshold: c.error_threshold,
            stagnation: c.stagnation_window,
            strategy: Strategy::Direct,
            amin: None,
            amax: None,
            window: None,
            frames_per_step: 10,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
            strict: false,
            seedless: true,
            coloring: Coloring::ShapeDistortion,
            densify_pixels: 4.0,
            dump_textures: false,
            tweens: false,
            multipliers: Vec::new(),
            carto: None,
            carto_frame: FrameHint::Auto,
            watchdog_ceiling: 0.5,
            exec: Exec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read(path)?;
        Self::from_json(std::str::from_utf8(&bytes).map_err(|e| Error::Malformed(e.to_string()))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn criteria(&self) -> StoppingCriteria {
        StoppingCriteria { error_threshold: self.threshold, stagnation_window: self.stagnation, max_iterations: self.max_iter }
    }

    pub fn policy(&self) -> Result<Option<AreaFractionPolicy>> {
        match (self.amin, self.amax) {
            (None, None) if self.window.is_none() => Ok(None),
            (Some(a_min), Some(a_max)) => {
                let p = AreaFractionPolicy { a_min, a_max, window: self.window };
                p.validate()?;
                Ok(Some(p))
            }
            _ => Err(Error::InvalidParameter("area-fraction steering needs both amin and amax".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::raster::check_k(self.texture_k)?;
        self.criteria().validate()?;
        BdvPolicy::FixedMass { multiplier: self.bdv_multiplier }.validate()?;
        if !(self.scale > 0.0 && self.scale < 1.0) {
            return Err(Error::InvalidParameter(format!("scale must lie in (0, 1), got {}", self.scale)));
        }
        if self.frames_per_step == 0 {
            return Err(Error::InvalidParameter("frames per step must be at least 1".into()));
        }
        if !(self.densify_pixels > 0.0) {
            return Err(Error::InvalidParameter("densify spacing must be positive".into()));
        }
        self.policy()?;
        Ok(())
    }

    fn report_options(&self) -> ReportOptions {
        ReportOptions { k: self.texture_k, ..Default::default() }
    }

    fn map_path(&self) -> Result<&Path> {
        self.map.as_deref().ok_or_else(|| Error::InvalidParameter("no map given".into()))
    }

    fn load_inputs(&self) -> Result<AttachedStatistics> {
        let map = read(self.map_path()?)?;
        let csv = self.stats.as_deref().map(read).transpose()?;
        self.parse_inputs(&map, csv.as_deref())
    }

    /// Parses a GeoJSON map and optional CSV statistics held in memory.
    pub fn parse_inputs(&self, map: &[u8], csv: Option<&[u8]>) -> Result<AttachedStatistics> {
        match csv {
            Some(csv) => {
                let map = parse_map(map, &ParseOptions::default())?;
                let opts = StatsOptions { id_column: self.id_column.clone(), value_column: self.key.clone(), time_column: self.time_column.clone() };
                attach_statistics(&map, csv, &opts)
            }
            None => {
                let key = self.key.clone().ok_or_else(|| Error::InvalidParameter("need a statistic key or a statistics file".into()))?;
                Ok(AttachedStatistics::Static(parse_map(map, &ParseOptions::with_statistic(key))?))
            }
        }
    }

    /// Normalizes a parsed map and, when iterations will run, densifies it
    /// to the configured edge length.
    pub fn prepare(&self, map: &MapModel) -> Result<MapModel> {
        let m = normalize(map, self.scale)?;
        if self.max_iter == 0 {
            return Ok(m);
        }
        Ok(densify(&m, self.densify_pixels / (1u64 << self.texture_k) as f64))
    }

    /// The normalized, densified static map.
    pub fn load_static(&self) -> Result<MapModel> {
        match self.load_inputs()? {
            AttachedStatistics::Static(m) => self.prepare(&m),
            AttachedStatistics::Temporal(ds) => Err(Error::InvalidParameter(format!(
                "statistics have {} time columns; pick one with --key or use animate",
                ds.len()
            ))),
        }
    }

    /// The normalized, densified time series.
    pub fn load_dataset(&self) -> Result<TimeSeriesDataset> {
        self.prepare_dataset(self.load_inputs()?)
    }

    /// A static map becomes a one-step series.
    pub fn prepare_dataset(&self, inputs: AttachedStatistics) -> Result<TimeSeriesDataset> {
        self.prepare_series(&as_series(inputs)?)
    }

    /// `raw` with its map normalized and densified.
    pub fn prepare_series(&self, raw: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        raw.with_map(self.prepare(&raw.map)?)
    }

    pub fn temporal(&self) -> Result<TemporalConfig> {
        Ok(TemporalConfig {
            k: self.texture_k,
            criteria: self.criteria(),
            bdv_multiplier: self.bdv_multiplier,
            policy: self.policy()?,
            report: self.report_options(),
            watchdog_ceiling: self.watchdog_ceiling,
            exec: self.exec,
            frame_exec: self.exec,
        })
    }
}

/// Parsed inputs as a series; a static map has the single time step `"0"`.
pub fn as_series(inputs: AttachedStatistics) -> Result<TimeSeriesDataset> {
    match inputs {
        AttachedStatistics::Temporal(ds) => Ok(ds),
        AttachedStatistics::Static(m) => TimeSeriesDataset::new(m.clone(), vec!["0".into()], vec![m.statistics()]),
    }
}

/// Maps an error to the process exit code: 1 for bad input, 2 for a
/// numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        1
    } else {
        2
    }
}

/// Exit code for a failed convergence under `--strict`.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    /// False when a strict run should exit with [`EXIT_NOT_CONVERGED`].
    pub converged: bool,
    pub summary: String,
}

impl CommandOutput {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && !self.converged {
            EXIT_NOT_CONVERGED
        } else {
            0
        }
    }
}

/// GeoJSON text with a top-level `frame` member naming the coordinate frame.
pub fn geojson_string(map: &MapModel, frame: CoordinateFrame, extra: Option<&[JsonObject]>) -> String {
    let mut fc: FeatureCollection = to_geojson(map, frame, extra);
    let mut fm = JsonObject::new();
    let name = match frame {
        CoordinateFrame::Source => "source",
        CoordinateFrame::Texture => "texture",
    };
    fm.insert("frame".into(), name.into());
    fc.foreign_members = Some(fm);
    GeoJson::FeatureCollection(fc).to_string()
}

/// Per-region report fields merged into emitted feature properties.
pub fn region_properties(report: &QualityReport) -> Vec<JsonObject> {
    report
        .regions
        .iter()
        .map(|r| {
            let mut o = JsonObject::new();
            o.insert("original_area".into(), r.original_area.into());
            o.insert("area".into(), r.area.into());
            o.insert("target_area".into(), r.target_area.into());
            o.insert("cartographic_error".into(), r.cartographic_error.into());
            o.insert("shape_distortion".into(), r.shape_distortion.into());
            o.insert("position_error".into(), r.position_error.into());
            o
        })
        .collect()
}

fn coloring_values(report: &QualityReport, coloring: Coloring) -> Option<Vec<f64>> {
    match coloring {
        Coloring::None => None,
        Coloring::ShapeDistortion => Some(report.regions.iter().map(|r| r.shape_distortion).collect()),
        Coloring::CartographicError => Some(report.regions.iter().map(|r| r.cartographic_error).collect()),
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_owned(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.push(path.clone());
        Ok(path)
    }
}

/// Run-side measures: the stopping rule works on pixel areas, while
/// `report.json` scores shoelace areas.
fn run_json(out: &RunOutcome) -> String {
    let v = serde_json::json!({
        "stop": out.stop,
        "iterations": out.iterations,
        "epsilon": out.state.epsilon,
        "xi": out.state.xi,
        "pixel_areas": out.state.pixel_areas,
        "background_mass": out.background_mass,
        "clamp_events": out.clamp_events,
    });
    serde_json::to_string_pretty(&v).expect("run summary serializes")
}

fn timing_json(out: &RunOutcome) -> String {
    serde_json::json!({
        "total_millis": out.total_millis,
        "mean_iteration_millis": out.mean_iteration_millis(),
        "iterations": out.iterations,
    })
    .to_string()
}

/// Static cartogram: `cartogram.geojson`, `cartogram.svg`, `trace.csv`,
/// `report.json`, `regions.csv`, `run.json` and `timing.json`.
pub fn cmd_cartogram(config: &RunConfig) -> Result<CommandOutput> {
    config.validate()?;
    let map = config.load_static()?;
    let engine = Engine::new(config.texture_k, config.exec)?;
    let policy = BdvPolicy::FixedMass { multiplier: config.bdv_multiplier };
    let out = engine.run(&map, &config.criteria(), &policy)?;
    let mut report = full_report(&map, &out.state.map, &map.statistics(), &config.report_options(), config.exec)?;
    report.iterations = Some(out.iterations);

    let mut w = Writer::new(&config.out_dir)?;
    w.write("config.json", config.to_json())?;
    let extra = region_properties(&report);
    if config.format.geojson() {
        w.write("cartogram.geojson", geojson_string(&out.state.map, CoordinateFrame::Source, Some(&extra)))?;
    }
    if config.format.svg() {
        let values = coloring_values(&report, config.coloring);
        let svg = render_svg(&out.state.map, values.as_deref(), config.coloring, &ColorRamp::bundled(), &SvgOptions::default());
        w.write("cartogram.svg", svg)?;
    }
    let mut trace = Vec::new();
    write_trace_csv(&out.trace, &mut trace)?;
    w.write("trace.csv", trace)?;
    w.write("report.json", serde_json::to_string_pretty(&report)?)?;
    let mut regions = Vec::new();
    report.write_regions_csv(&mut regions)?;
    w.write("regions.csv", regions)?;
    w.write("run.json", run_json(&out))?;
    w.write("timing.json", timing_json(&out))?;
    if config.dump_textures {
        dump_textures(config, &engine, &out.state.map, &policy, &w.dir.join("textures"))?;
        w.files.push(w.dir.join("textures"));
    }
    let converged = out.stop == StopReason::Converged;
    let summary = format!(
        "{:?} after {} iterations: pixel xi {:.4}; epsilon {:.4}, xi {:.4}, tau {:.3}, hamming {:.3}, R {:.3}",
        out.stop, out.iterations, out.state.xi, report.epsilon, report.xi, report.tau, report.hamming_avg, report.r
    );
    Ok(CommandOutput { files: w.files, converged, summary })
}

/// Textures of one further deformation step from `map`.
fn dump_textures(config: &RunConfig, engine: &Engine, map: &MapModel, policy: &BdvPolicy, dir: &Path) -> Result<()> {
    let labels = label_pixels(map, engine.k(), config.exec)?;
    let bdv = match *policy {
        BdvPolicy::FixedMass { multiplier } | BdvPolicy::Rederive { multiplier } => multiplier * default_bdv(map, &labels),
        BdvPolicy::BackgroundMass { mass } => mass / labels.background_count.max(1) as f64,
    };
    let density = build_density(map, &labels, bdv, config.exec)?;
    let ii = crate::inim::IntegralImageSet::compute(&density, config.exec)?;
    let base = crate::det::BaseMap::cached(engine.size(), config.exec)?;
    let field = crate::det::residual_field(&ii, &base, config.exec)?;
    write_dumps(dir, &labels, &density, &ii, &field)
}

/// Time-varying cartogram: `manifest.json`, `frames/tNNN.{geojson,svg}`,
/// optional `tweens/fNNNN.geojson`, and `timing.csv`.
pub fn cmd_animate(config: &RunConfig) -> Result<CommandOutput> {
    config.validate()?;
    let ds = config.load_dataset()?;
    let tc = config.temporal()?;
    let seq = run_strategy(config.strategy, &ds, &tc)?;
    let mut w = Writer::new(&config.out_dir)?;
    w.write("config.json", config.to_json())?;
    let ramp = ColorRamp::bundled();
    let mut files = Vec::with_capacity(seq.frames.len());
    for (t, f) in seq.frames.iter().enumerate() {
        let (Some(map), Some(report)) = (&f.map, &f.report) else {
            files.push(None);
            continue;
        };
        let stem = format!("frames/t{t:03}");
        if config.format.geojson() {
            w.write(&format!("{stem}.geojson"), geojson_string(map, CoordinateFrame::Source, Some(&region_properties(report))))?;
        }
        if config.format.svg() {
            let values = coloring_values(report, config.coloring);
            let opts = SvgOptions { title: Some(f.time.clone()), ..Default::default() };
            w.write(&format!("{stem}.svg"), render_svg(map, values.as_deref(), config.coloring, &ramp, &opts))?;
        }
        files.push(Some(if config.format.geojson() { format!("{stem}.geojson") } else { format!("{stem}.svg") }));
    }
    if config.tweens {
        let maps = seq.maps()?;
        for (k, m) in interpolate_frames(&maps, config.frames_per_step)?.iter().enumerate() {
            w.write(&format!("tweens/f{k:04}.geojson"), geojson_string(m, CoordinateFrame::Source, None))?;
        }
    }
    let manifest = Manifest::new(&seq, &ds, config.frames_per_step, &files).without_timings();
    w.write("manifest.json", serde_json::to_string_pretty(&manifest)?)?;
    let mut timing = String::from("time,iterations,millis\n");
    for f in &seq.frames {
        timing.push_str(&format!("{},{},{}\n", f.time, f.iterations, f.millis));
    }
    w.write("timing.csv", timing)?;

    let failed = seq.frames.iter().filter(|f| f.map.is_none()).count();
    let unconverged = seq.frames.iter().filter(|f| f.stop != Some(StopReason::Converged)).count();
    let flagged = seq.frames.iter().filter(|f| f.flagged).count();
    let summary = format!(
        "{:?}: {} frames, {failed} failed, {unconverged} not converged, {flagged} flagged, mean {:.1} ms per frame",
        config.strategy,
        seq.frames.len(),
        seq.mean_millis()
    );
    Ok(CommandOutput { files: w.files, converged: unconverged == 0, summary })
}

/// One row of a BDV sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub multiplier: f64,
    pub stop: Option<StopReason>,
    pub iterations: usize,
    pub epsilon: Option<f64>,
    pub xi: Option<f64>,
    pub tau: Option<f64>,
    pub hamming_avg: Option<f64>,
    pub hamming_max: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        self.stop == Some(StopReason::Converged)
    }
}

/// 0.95, 0.96, ..., 1.05.
pub fn default_multipliers() -> Vec<f64> {
    (95..=105).map(|m| m as f64 / 100.0).collect()
}

/// Runs the static pipeline once per multiplier, sorted ascending. A
/// failed run is recorded in its row and the sweep continues.
pub fn sweep_bdv(map: &MapModel, config: &RunConfig, multipliers: &[f64]) -> Result<Vec<SweepRow>> {
    let mut ms = multipliers.to_vec();
    for &m in &ms {
        if !(0.5..=2.0).contains(&m) {
            return Err(Error::InvalidParameter(format!("sweep multipliers must lie in [0.5, 2], got {m}")));
        }
    }
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    let engine = Engine::new(config.texture_k, config.exec)?;
    let criteria = config.criteria();
    let opts = config.report_options();
    let rows = ms
        .iter()
        .map(|&multiplier| {
            let run = || -> Result<(RunOutcome, QualityReport)> {
                let out = engine.run(map, &criteria, &BdvPolicy::FixedMass { multiplier })?;
                let rep = full_report(map, &out.state.map, &map.statistics(), &opts, config.exec)?;
                Ok((out, rep))
            };
            match run() {
                Ok((out, rep)) => SweepRow {
                    multiplier,
                    stop: Some(out.stop),
                    iterations: out.iterations,
                    epsilon: Some(rep.epsilon),
                    xi: Some(rep.xi),
                    tau: Some(rep.tau),
                    hamming_avg: Some(rep.hamming_avg),
                    hamming_max: Some(rep.hamming_max),
                    r: Some(rep.r),
                    error: None,
                },
                Err(e) => SweepRow {
                    multiplier,
                    stop: None,
                    iterations: 0,
                    epsilon: None,
                    xi: None,
                    tau: None,
                    hamming_avg: None,
                    hamming_max: None,
                    r: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}

/// BDV sweep written to `sweep.csv`.
pub fn cmd_sweep_bdv(config: &RunConfig) -> Result<CommandOutput> {
    config.validate()?;
    let map = config.load_static()?;
    let ms = if config.multipliers.is_empty() { default_multipliers() } else { config.multipliers.clone() };
    let rows = sweep_bdv(&map, config, &ms)?;
    let mut w = Writer::new(&config.out_dir)?;
    w.write("config.json", config.to_json())?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        csv.serialize(r)?;
    }
    w.write("sweep.csv", csv.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    let best = rows
        .iter()
        .filter_map(|r| r.hamming_avg.map(|h| (r.multiplier, h)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let summary = match best {
        Some((m, h)) => format!("{} runs, lowest average shape distortion {h:.4} at multiplier {m:.2}", rows.len()),
        None => format!("{} runs, none succeeded", rows.len()),
    };
    Ok(CommandOutput { files: w.files, converged: rows.iter().all(SweepRow::converged), summary })
}

fn detect_frame(bytes: &[u8], hint: FrameHint) -> Result<FrameHint> {
    if hint != FrameHint::Auto {
        return Ok(hint);
    }
    let v: serde_json::Value = serde_json::from_slice(bytes)?;
    Ok(match v.get("frame").and_then(|f| f.as_str()) {
        Some("texture") => FrameHint::Texture,
        _ => FrameHint::Source,
    })
}

/// Scores an existing cartogram file against the original map. Both are
/// brought into the original's normalized frame first; regions are
/// matched by id.
pub fn score_files(config: &RunConfig) -> Result<QualityReport> {
    let map = config.load_static()?;
    let carto_path = config.carto.as_deref().ok_or_else(|| Error::InvalidParameter("no cartogram file given".into()))?;
    let bytes = read(carto_path)?;
    let frame = detect_frame(&bytes, config.carto_frame)?;
    let parsed = parse_map(&bytes, &ParseOptions::default())?;
    let norm = map.normalization;
    let carto_raw = match frame {
        // parsing flips y, so (x, 1 - y) arrives as (x, y - 1)
        FrameHint::Texture => parsed.map_points(|p| Point::new(p.x, p.y + 1.0)),
        _ => parsed.map_points(|p| norm.apply(p)),
    };
    let mut regions = Vec::with_capacity(map.regions.len());
    for r in &map.regions {
        let i = carto_raw.region_index(&r.id).ok_or_else(|| Error::MissingStatistic(r.id.clone()))?;
        let mut c = carto_raw.regions[i].clone();
        c.statistic = r.statistic;
        regions.push(c);
    }
    if carto_raw.regions.len() != map.regions.len() {
        let extra = carto_raw.regions.iter().find(|c| map.region_index(&c.id).is_none()).expect("count differs");
        return Err(Error::UnknownRegion(extra.id.clone()));
    }
    let mut carto = MapModel::new(regions);
    carto.normalization = norm;
    full_report(&map, &carto, &map.statistics(), &config.report_options(), config.exec)
}

/// Quality report of an external cartogram, written to `report.json`.
pub fn cmd_metrics(config: &RunConfig) -> Result<CommandOutput> {
    crate::raster::check_k(config.texture_k)?;
    let cfg = RunConfig { max_iter: 0, ..config.clone() };
    let report = score_files(&cfg)?;
    let mut w = Writer::new(&config.out_dir)?;
    w.write("config.json", config.to_json())?;
    w.write("report.json", serde_json::to_string_pretty(&report)?)?;
    let mut regions = Vec::new();
    report.write_regions_csv(&mut regions)?;
    w.write("regions.csv", regions)?;
    let summary = format!(
        "epsilon {:.4}, xi {:.4}, tau {:.3}, hamming {:.3}/{:.3}, R {:.3}",
        report.epsilon, report.xi, report.tau, report.hamming_avg, report.hamming_max, report.r
    );
    Ok(CommandOutput { files: w.files, converged: true, summary })
}
