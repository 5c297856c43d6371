//! The iterative static-cartogram loop: rasterize, build density, compute
//! integral images, evaluate the residual field, advect.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::det::{advect, residual_field_into, BaseMap, DisplacementField};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geo::MapModel;
use crate::inim::IntegralImageSet;
use crate::metrics::cartographic_errors;
use crate::raster::{build_density_with, check_k, default_bdv, label_pixels_with, LabelTexture, DEFAULT_K};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingCriteria {
    pub error_threshold: f64,
    pub stagnation_window: usize,
    pub max_iterations: usize,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        StoppingCriteria { error_threshold: 0.01, stagnation_window: 32, max_iterations: 512 }
    }
}

impl StoppingCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(self.error_threshold > 0.0) || self.stagnation_window == 0 {
            return Err(Error::InvalidParameter(
                "error threshold and stagnation window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How the background density is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BdvPolicy {
    /// Background mass fixed at `multiplier * d0 * N_background(0)`,
    /// spread over the current background pixels.
    FixedMass { multiplier: f64 },
    /// Explicit background mass, spread over the current background pixels.
    BackgroundMass { mass: f64 },
    /// `multiplier * M_i / N_map(current)` at every iteration.
    Rederive { multiplier: f64 },
}

impl Default for BdvPolicy {
    fn default() -> Self {
        BdvPolicy::FixedMass { multiplier: 1.0 }
    }
}

impl BdvPolicy {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            BdvPolicy::FixedMass { multiplier } | BdvPolicy::Rederive { multiplier } => multiplier,
            BdvPolicy::BackgroundMass { mass } => mass,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("background density parameter must be positive, got {v}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub k: u32,
    pub criteria: StoppingCriteria,
    pub bdv: BdvPolicy,
    pub exec: Exec,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { k: DEFAULT_K, criteria: StoppingCriteria::default(), bdv: BdvPolicy::default(), exec: Exec::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartogramState {
    pub map: MapModel,
    pub iteration: usize,
    pub pixel_areas: Vec<u64>,
    pub shoelace_areas: Vec<f64>,
    /// Desired pixel areas `w(v)` at this iteration.
    pub targets: Vec<f64>,
    pub epsilon: f64,
    pub xi: f64,
    pub epsilon_history: Vec<f64>,
    pub xi_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub epsilon: f64,
    pub xi: f64,
    pub millis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Stagnated,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: CartogramState,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    /// Iterations actually performed (the returned state may be earlier).
    pub iterations: usize,
    /// Vertex clamp events summed over the run.
    pub clamp_events: usize,
    /// Background mass at the start of the run.
    pub background_mass: f64,
    /// Total density mass `C` per performed deformation.
    pub mass_history: Vec<f64>,
    pub total_millis: f64,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn mean_iteration_millis(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.total_millis / self.iterations as f64
        }
    }
}

/// `w(v) = s(v) / Σ s * N_map`.
pub fn target_weights(map: &MapModel, total_pixels_map: u64) -> Vec<f64> {
    let total = map.total_statistic();
    map.regions.iter().map(|r| r.statistic / total * total_pixels_map as f64).collect()
}

pub fn write_trace_csv<W: std::io::Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Texture-sized buffers recycled across the iterations of one run.
struct Workspace {
    labels: Vec<u32>,
    density: Vec<f64>,
    ii: IntegralImageSet,
    field: DisplacementField,
}

impl Workspace {
    fn new() -> Self {
        Workspace { labels: Vec::new(), density: Vec::new(), ii: IntegralImageSet::empty(), field: DisplacementField::zero(0) }
    }
}

pub struct Engine {
    k: u32,
    exec: Exec,
    base: Arc<BaseMap>,
}

impl Engine {
    pub fn new(k: u32, exec: Exec) -> Result<Self> {
        let n = check_k(k)?;
        Ok(Engine { k, exec, base: BaseMap::cached(n, exec)? })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn size(&self) -> usize {
        self.base.size
    }

    fn labels(&self, map: &MapModel, iteration: usize, ws: &mut Workspace) -> Result<LabelTexture> {
        let labels = label_pixels_with(map, self.k, self.exec, std::mem::take(&mut ws.labels))?;
        if let Some(r) = labels.pixel_counts.iter().position(|&c| c == 0) {
            return Err(if iteration == 0 {
                Error::ZeroPixelRegion(labels.empty_regions(map))
            } else {
                Error::RegionCollapsed { id: map.regions[r].id.clone(), iteration }
            });
        }
        Ok(labels)
    }

    fn state_from(&self, map: MapModel, iteration: usize, labels: &LabelTexture, history: Option<&CartogramState>) -> CartogramState {
        let targets = target_weights(&map, labels.map_pixels());
        let o: Vec<f64> = labels.pixel_counts.iter().map(|&c| c as f64).collect();
        let (epsilon, xi, _) = cartographic_errors(&o, &targets).unwrap_or((f64::INFINITY, f64::INFINITY, vec![]));
        let shoelace_areas = map.regions.iter().map(|r| r.area()).collect();
        let (mut eh, mut xh) = history.map(|h| (h.epsilon_history.clone(), h.xi_history.clone())).unwrap_or_default();
        eh.push(epsilon);
        xh.push(xi);
        CartogramState {
            map,
            iteration,
            pixel_areas: labels.pixel_counts.clone(),
            shoelace_areas,
            targets,
            epsilon,
            xi,
            epsilon_history: eh,
            xi_history: xh,
        }
    }

    /// State at iteration 0 for a normalized map.
    pub fn initial_state(&self, map: &MapModel) -> Result<CartogramState> {
        let labels = self.labels(map, 0, &mut Workspace::new())?;
        Ok(self.state_from(map.clone(), 0, &labels, None))
    }

    fn resolve_bdv(&self, policy: &BdvPolicy, map: &MapModel, labels: &LabelTexture, fixed_mass: f64) -> f64 {
        let mean = default_bdv(map, labels);
        let bdv = match *policy {
            BdvPolicy::Rederive { multiplier } => multiplier * mean,
            BdvPolicy::FixedMass { .. } | BdvPolicy::BackgroundMass { .. } => {
                if labels.background_count == 0 {
                    mean
                } else {
                    fixed_mass / labels.background_count as f64
                }
            }
        };
        if bdv > 0.0 && bdv.is_finite() {
            bdv
        } else {
            mean
        }
    }

    fn initial_background_mass(&self, policy: &BdvPolicy, map: &MapModel, labels: &LabelTexture) -> f64 {
        match *policy {
            BdvPolicy::FixedMass { multiplier } | BdvPolicy::Rederive { multiplier } => {
                multiplier * default_bdv(map, labels) * labels.background_count as f64
            }
            BdvPolicy::BackgroundMass { mass } => mass,
        }
    }

    /// One deformation of `map` given its label texture. Returns the moved
    /// map, the clamp count and the density mass used.
    fn deform(&self, map: &MapModel, labels: &LabelTexture, bdv: f64, ws: &mut Workspace) -> Result<(MapModel, usize, f64)> {
        let density = build_density_with(map, labels, bdv, self.exec, std::mem::take(&mut ws.density))?;
        ws.ii.compute_into(&density.d, density.size, self.exec)?;
        ws.density = density.d;
        residual_field_into(&ws.ii, &self.base, self.exec, &mut ws.field)?;
        let (moved, clamps) = advect(&map.vertices(), &ws.field, self.exec);
        let mut out = map.clone();
        out.set_vertices(&moved)?;
        Ok((out, clamps, ws.ii.total))
    }

    /// One iteration: recompute areas, rebuild the density, deform, and
    /// measure the result.
    pub fn step(&self, state: &CartogramState, policy: &BdvPolicy) -> Result<CartogramState> {
        policy.validate()?;
        let mut ws = Workspace::new();
        let labels = self.labels(&state.map, state.iteration, &mut ws)?;
        let mass = self.initial_background_mass(policy, &state.map, &labels);
        let bdv = self.resolve_bdv(policy, &state.map, &labels, mass);
        let (map, _, _) = self.deform(&state.map, &labels, bdv, &mut ws)?;
        let next = self.labels(&map, state.iteration + 1, &mut ws)?;
        Ok(self.state_from(map, state.iteration + 1, &next, Some(state)))
    }

    /// Runs to convergence, stagnation, or the iteration cap.
    pub fn run(&self, map: &MapModel, criteria: &StoppingCriteria, policy: &BdvPolicy) -> Result<RunOutcome> {
        self.exec.install(|| self.run_here(map, criteria, policy))
    }

    fn run_here(&self, map: &MapModel, criteria: &StoppingCriteria, policy: &BdvPolicy) -> Result<RunOutcome> {
        criteria.validate()?;
        policy.validate()?;
        let started = Instant::now();
        let t0 = Instant::now();
        let mut ws = Workspace::new();
        let mut labels = self.labels(map, 0, &mut ws)?;
        let mut state = self.state_from(map.clone(), 0, &labels, None);
        let mut trace = vec![TraceRow { iteration: 0, epsilon: state.epsilon, xi: state.xi, millis: ms(t0) }];
        let background_mass = self.initial_background_mass(policy, map, &labels);

        let mut best = state.clone();
        let mut since_best = 0;
        let mut clamp_events = 0;
        let mut mass_history = Vec::new();
        let mut stop = StopReason::MaxIterations;
        let mut iterations = 0;

        loop {
            if state.xi < criteria.error_threshold {
                stop = StopReason::Converged;
                break;
            }
            if iterations >= criteria.max_iterations {
                break;
            }
            let t = Instant::now();
            let bdv = self.resolve_bdv(policy, &state.map, &labels, background_mass);
            let (moved, clamps, mass) = self.deform(&state.map, &labels, bdv, &mut ws)?;
            clamp_events += clamps;
            mass_history.push(mass);
            iterations += 1;
            let next = self.labels(&moved, iterations, &mut ws)?;
            ws.labels = std::mem::replace(&mut labels, next).labels;
            state = self.state_from(moved, iterations, &labels, Some(&state));
            trace.push(TraceRow { iteration: iterations, epsilon: state.epsilon, xi: state.xi, millis: ms(t) });

            if state.xi < best.xi {
                best = state.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= criteria.stagnation_window {
                    stop = StopReason::Stagnated;
                    break;
                }
            }
        }
        if clamp_events > 0 {
            log::warn!("{clamp_events} vertex positions were clamped to the unit square");
        }
        let state = if stop == StopReason::Stagnated {
            best.epsilon_history = state.epsilon_history;
            best.xi_history = state.xi_history;
            best
        } else {
            state
        };
        Ok(RunOutcome {
            state,
            trace,
            stop,
            iterations,
            clamp_events,
            background_mass,
            mass_history,
            total_millis: ms(started),
        })
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
