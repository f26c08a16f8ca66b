//! Scenario grids, synthetic observation oracles, and vehicle-log ingestion.
//!
//! Calibration and validation need observations. This module provides three
//! sources, in increasing order of realism:
//!
//! 1. **Noisy equilibrium** ([`synthesize_equilibrium_noise`]) — the model's
//!    own predictions plus Gaussian observation noise. With zero noise this
//!    is an exact oracle: a correct calibration pipeline must recover its
//!    generator's predictions to float precision.
//! 2. **Logit population** ([`synthesize_logit`]) — a boundedly rational
//!    crowd: each vehicle picks the cheaper-looking strategy with a logistic
//!    choice rule, the crowd settles at the rule's fixed point, and a finite
//!    population is sampled binomially. Produces equilibrium-like but not
//!    equilibrium-exact data, for robustness testing.
//! 3. **Vehicle logs** ([`ingest_vehicle_log`]) — per-vehicle decision events
//!    from an external microsimulation, aggregated into observed splits over
//!    a steady-state measurement window.
//!
//! All synthetic generators draw from counter-based RNG streams keyed by the
//! configuration index, so output is reproducible bit for bit regardless of
//! how work is scheduled across threads.
//!
//! ## Scenario grids
//!
//! A [`ScenarioGrid`] describes a family of flow configurations observed at
//! a fixed demand level: a total demand split between the lane-1 through
//! platoon (`f1`) and a budget shared by the entering, exiting, and
//! inner-lane streams. Relative flows are swept over the unit simplex with a
//! fixed step ([`generate_grid`]), optionally holding one class at a fixed
//! share. [`reference_calibration_grid`] is the frozen 415-configuration
//! preset used by the calibration acceptance pipeline.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::Serialize;

use crate::calibration::predict;
use crate::dataset::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::flow::{CostCoefficients, FlowConfiguration, FlowDistribution, WeavingConfiguration};

/// Default total demand of the reference scenario, in vehicles per hour.
pub const DEFAULT_TOTAL_FLOW: f64 = 1400.0;

/// Default combined budget of the entering/exiting/inner-lane streams.
pub const DEFAULT_NEIGHBOR_BUDGET: f64 = 600.0;

/// Default lane-1 through flow.
pub const DEFAULT_LANE1_FLOW: f64 = 800.0;

/// Default simplex step of a grid sweep (25 levels per axis).
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 24.0;

/// Size of the frozen calibration preset.
pub const REFERENCE_GRID_POINTS: usize = 415;

/// Seed of the quasi-random configurations that densify the preset beyond
/// the lattice. Frozen: changing it would silently change every downstream
/// calibration benchmark.
const REFERENCE_FILL_SEED: u64 = 7241;

/// The stream class optionally held at a fixed share during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedClass {
    /// Hold the entering share fixed; the exiting share is swept.
    Enter,
    /// Hold the exiting share fixed; the entering share is swept.
    Exit,
    /// Hold the inner-lane share fixed; the entering share is swept.
    Lane2,
}

/// A family of flow configurations at one demand level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioGrid {
    /// Total demand in vehicles per hour (bookkeeping; predictions depend
    /// only on relative flows).
    pub total_flow: f64,
    /// Combined entering + exiting + inner-lane demand.
    pub neighbor_budget: f64,
    /// Lane-1 through demand. Must satisfy
    /// `total_flow = neighbor_budget + f1`.
    pub f1: f64,
    /// Optionally hold one class at a fixed share.
    pub fixed: Option<(FixedClass, f64)>,
    /// Simplex step of the sweep, in `(0, 1]`.
    pub grid_step: f64,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        ScenarioGrid {
            total_flow: DEFAULT_TOTAL_FLOW,
            neighbor_budget: DEFAULT_NEIGHBOR_BUDGET,
            f1: DEFAULT_LANE1_FLOW,
            fixed: None,
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

impl ScenarioGrid {
    /// Check grid consistency.
    pub fn validate(&self) -> Result<()> {
        let check = |name, value: f64, ok: bool, requirement| {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange { context: "scenario grid", name, value, requirement })
            }
        };
        check(
            "total_flow",
            self.total_flow,
            self.total_flow.is_finite() && self.total_flow > 0.0,
            "must be finite and > 0",
        )?;
        check(
            "neighbor_budget",
            self.neighbor_budget,
            self.neighbor_budget.is_finite() && self.neighbor_budget > 0.0,
            "must be finite and > 0",
        )?;
        check("f1", self.f1, self.f1.is_finite() && self.f1 > 0.0, "must be finite and > 0")?;
        check(
            "total_flow",
            self.total_flow,
            (self.total_flow - (self.neighbor_budget + self.f1)).abs()
                <= 1e-6 * self.total_flow,
            "must equal neighbor_budget + f1",
        )?;
        check(
            "grid_step",
            self.grid_step,
            self.grid_step.is_finite() && self.grid_step > 0.0 && self.grid_step <= 1.0,
            "must lie in (0, 1]",
        )?;
        if let Some((_, value)) = self.fixed {
            check(
                "fixed_value",
                value,
                value.is_finite() && (0.0..=1.0).contains(&value),
                "must lie in [0, 1]",
            )?;
        }
        Ok(())
    }
}

/// Enumerate the grid's flow configurations, sorted lexicographically by
/// `(n_enter, n_exit, n2)` with exact duplicates removed.
///
/// When `1/grid_step` is an integer the sweep runs on the exact integer
/// lattice (`i/m, j/m, (m-i-j)/m`), so counts and component values carry no
/// accumulated float error; otherwise shares are stepped multiplicatively.
pub fn generate_grid(grid: &ScenarioGrid) -> Result<Vec<FlowConfiguration>> {
    grid.validate()?;
    let mut configurations = Vec::new();
    match grid.fixed {
        None => {
            let levels = 1.0 / grid.grid_step;
            let m = levels.round();
            if (levels - m).abs() <= 1e-9 && m >= 1.0 {
                let m = m as usize;
                for i in 0..=m {
                    for j in 0..=(m - i) {
                        let k = m - i - j;
                        configurations.push(FlowConfiguration::new(
                            i as f64 / m as f64,
                            j as f64 / m as f64,
                            k as f64 / m as f64,
                        )?);
                    }
                }
            } else {
                let mut i = 0u64;
                while i as f64 * grid.grid_step <= 1.0 + 1e-12 {
                    let n_enter = (i as f64 * grid.grid_step).min(1.0);
                    let mut j = 0u64;
                    while n_enter + j as f64 * grid.grid_step <= 1.0 + 1e-12 {
                        let n_exit = j as f64 * grid.grid_step;
                        let n2 = (1.0 - n_enter - n_exit).max(0.0);
                        configurations.push(FlowConfiguration::new(n_enter, n_exit, n2)?);
                        j += 1;
                    }
                    i += 1;
                }
            }
        }
        Some((class, value)) => {
            let budget = 1.0 - value;
            let mut k = 0u64;
            while k as f64 * grid.grid_step <= budget + 1e-12 {
                let swept = (k as f64 * grid.grid_step).min(budget.max(0.0));
                let rest = (budget - swept).max(0.0);
                let (n_enter, n_exit, n2) = match class {
                    FixedClass::Enter => (value, swept, rest),
                    FixedClass::Exit => (swept, value, rest),
                    FixedClass::Lane2 => (swept, rest, value),
                };
                configurations.push(FlowConfiguration::new(n_enter, n_exit, n2)?);
                k += 1;
            }
        }
    }
    sort_configurations(&mut configurations);
    if configurations.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(configurations)
}

/// Keep only configurations whose three components all lie in
/// `[minimum, maximum]`.
///
/// # Errors
///
/// [`Error::EmptyGrid`] when nothing survives.
pub fn filter_components(
    configurations: &[FlowConfiguration],
    minimum: f64,
    maximum: f64,
) -> Result<Vec<FlowConfiguration>> {
    let kept: Vec<FlowConfiguration> = configurations
        .iter()
        .filter(|n| {
            [n.n_enter(), n.n_exit(), n.n2()]
                .iter()
                .all(|v| *v >= minimum && *v <= maximum)
        })
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(kept)
}

/// Draw `count` configurations uniformly from the simplex (exponential
/// spacings, normalized), reproducibly from `seed`.
pub fn sample_simplex(count: usize, seed: u64) -> Vec<FlowConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw_simplex(&mut rng)).collect()
}

/// One uniform simplex draw.
fn draw_simplex(rng: &mut ChaCha8Rng) -> FlowConfiguration {
    loop {
        let e1 = -(1.0 - rng.random::<f64>()).ln();
        let e2 = -(1.0 - rng.random::<f64>()).ln();
        let e3 = -(1.0 - rng.random::<f64>()).ln();
        let total = e1 + e2 + e3;
        if total > 0.0 {
            // Constructor renormalization absorbs the last-ulp sum error.
            if let Ok(n) = FlowConfiguration::new(e1 / total, e2 / total, e3 / total) {
                return n;
            }
        }
        // Astronomically unlikely (all three uniforms at zero); redraw.
    }
}

/// The frozen 415-configuration calibration preset: the full default-step
/// lattice (325 points), densified with 90 reproducible quasi-random
/// configurations. Sorted and duplicate-free; byte-identical on every call.
pub fn reference_calibration_grid() -> Vec<FlowConfiguration> {
    let mut configurations =
        generate_grid(&ScenarioGrid::default()).expect("default grid is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(REFERENCE_FILL_SEED);
    while configurations.len() < REFERENCE_GRID_POINTS {
        configurations.push(draw_simplex(&mut rng));
        sort_configurations(&mut configurations);
    }
    debug_assert_eq!(configurations.len(), REFERENCE_GRID_POINTS);
    configurations
}

/// Sort lexicographically by components and drop exact duplicates.
fn sort_configurations(configurations: &mut Vec<FlowConfiguration>) {
    configurations.sort_by(|a, b| {
        [a.n_enter(), a.n_exit(), a.n2()]
            .iter()
            .zip([b.n_enter(), b.n_exit(), b.n2()].iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    configurations.dedup();
}

/// Scenario label for the `index`-th configuration of a batch.
fn scenario_label(index: usize) -> String {
    format!("c{index:04}")
}

/// Generate observations from the model's own equilibrium predictions plus
/// Gaussian noise on the steadfast share (clamped back into `[0, 1]`).
///
/// Each configuration contributes `samples_per_configuration` points labeled
/// with the same scenario id (`c0000`, `c0001`, ...) and unit weight.
/// Configuration `i` draws from RNG stream `i` of `seed`.
///
/// With `noise_sigma = 0` the observations equal the predictions exactly.
pub fn synthesize_equilibrium_noise(
    flows: &[FlowConfiguration],
    coefficients: &CostCoefficients,
    noise_sigma: f64,
    samples_per_configuration: usize,
    seed: u64,
) -> Result<Dataset> {
    if flows.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::OutOfRange {
            context: "noise synthesis",
            name: "noise_sigma",
            value: noise_sigma,
            requirement: "must be finite and >= 0",
        });
    }
    if samples_per_configuration == 0 {
        return Err(Error::OutOfRange {
            context: "noise synthesis",
            name: "samples_per_configuration",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }

    let groups = exec::map_indices(flows.len(), |index| {
        let truth = predict(coefficients, &flows[index]).x1_s();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let normal = (noise_sigma > 0.0)
            .then(|| Normal::new(0.0, noise_sigma).expect("sigma checked above"));
        (0..samples_per_configuration)
            .map(|_| {
                let noise = normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
                let observed = FlowDistribution::from_steadfast_share(
                    (truth + noise).clamp(0.0, 1.0),
                )
                .expect("clamped share is valid");
                DataPoint::new(flows[index], observed, 1.0, Some(scenario_label(index)))
                    .expect("unit weight is valid")
            })
            .collect::<Vec<DataPoint>>()
    });
    Ok(Dataset::from_points(groups.into_iter().flatten().collect()))
}

/// Result of [`synthesize_logit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogitSynthesis {
    /// One observation per configuration, weighted by the population size.
    pub dataset: Dataset,
    /// Indices of configurations whose choice dynamics had not settled
    /// (successive iterates still more than `1e-6` apart) when the iteration
    /// budget ran out. Their points are still included.
    pub non_converged: Vec<usize>,
}

/// Generate observations from a boundedly rational population.
///
/// The crowd's bypass share settles where it reproduces itself under the
/// logistic choice rule ([`logit_fixed_point`]); then `population` vehicles
/// each bypass independently with that probability, and the realized count
/// becomes the observation. Sharper `sensitivity` approaches the equilibrium
/// oracle; smaller populations add more sampling noise. Configuration `i`
/// draws from RNG stream `i` of `seed`.
pub fn synthesize_logit(
    flows: &[FlowConfiguration],
    coefficients: &CostCoefficients,
    sensitivity: f64,
    population: u64,
    iterations: usize,
    seed: u64,
) -> Result<LogitSynthesis> {
    if flows.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !sensitivity.is_finite() || sensitivity <= 0.0 {
        return Err(Error::OutOfRange {
            context: "logit synthesis",
            name: "sensitivity",
            value: sensitivity,
            requirement: "must be finite and > 0",
        });
    }
    if population == 0 {
        return Err(Error::OutOfRange {
            context: "logit synthesis",
            name: "population",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }
    if iterations == 0 {
        return Err(Error::OutOfRange {
            context: "logit synthesis",
            name: "iterations",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }

    let outcomes = exec::map_indices(flows.len(), |index| {
        let configuration = WeavingConfiguration::new(flows[index], *coefficients);
        let (share, converged) = logit_fixed_point(&configuration, sensitivity, iterations);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let bypassers = Binomial::new(population, share.clamp(0.0, 1.0))
            .expect("share is a probability")
            .sample(&mut rng);
        let observed =
            FlowDistribution::from_bypass_share(bypassers as f64 / population as f64)
                .expect("count ratio is a probability");
        let point =
            DataPoint::new(flows[index], observed, population as f64, Some(scenario_label(index)))
                .expect("population weight is valid");
        (point, converged)
    });

    let mut points = Vec::with_capacity(outcomes.len());
    let mut non_converged = Vec::new();
    for (index, (point, converged)) in outcomes.into_iter().enumerate() {
        if !converged {
            non_converged.push(index);
        }
        points.push(point);
    }
    Ok(LogitSynthesis { dataset: Dataset::from_points(points), non_converged })
}

/// Solve the logistic choice fixed point: the bypass share `x` with
/// `x = logistic(sensitivity * (cost_steadfast(x) - cost_bypass(x)))`.
///
/// The staying cost falls and the bypass cost rises as more of the platoon
/// bypasses, so the logistic response is strictly decreasing in `x` and the
/// fixed point is unique. It is bracketed by bisection on `[0, 1]` —
/// `iterations` caps the number of halvings — which converges for *every*
/// sensitivity, unlike naive (even damped) best-response iteration, whose
/// steps overshoot and cycle once the response becomes steep. Returns the
/// bracket midpoint and whether the bracket closed to within `1e-6`.
pub fn logit_fixed_point(
    configuration: &WeavingConfiguration,
    sensitivity: f64,
    iterations: usize,
) -> (f64, bool) {
    let response = |share: f64| {
        let x = FlowDistribution::from_bypass_share(share).expect("share stays in [0, 1]");
        let gap = configuration.cost_steadfast(&x) - configuration.cost_bypass(&x);
        1.0 / (1.0 + (-sensitivity * gap).exp())
    };
    // response(0) > 0 and response(1) < 1, so the root lies strictly inside.
    let (mut low, mut high) = (0.0f64, 1.0f64);
    for _ in 0..iterations {
        if high - low <= 1e-6 {
            break;
        }
        let mid = 0.5 * (low + high);
        if response(mid) > mid {
            low = mid;
        } else {
            high = mid;
        }
    }
    (0.5 * (low + high), high - low <= 1e-6)
}

/// Vehicle classes appearing in a microsimulation log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VehicleClass {
    /// Through vehicle starting in the outer lane 1 (the deciders).
    Through1,
    /// Through vehicle in the inner lane 2.
    Through2,
    /// Vehicle entering from the on-ramp.
    Enter,
    /// Vehicle exiting at the off-ramp.
    Exit,
}

impl VehicleClass {
    fn parse(text: &str) -> Option<Self> {
        match text {
            "Through1" => Some(VehicleClass::Through1),
            "Through2" => Some(VehicleClass::Through2),
            "Enter" => Some(VehicleClass::Enter),
            "Exit" => Some(VehicleClass::Exit),
            _ => None,
        }
    }
}

/// Decision recorded for a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    /// Stayed in lane 1.
    Steadfast,
    /// Changed into lane 2.
    Bypass,
    /// Not applicable (every class except lane-1 through vehicles).
    Na,
}

impl Decision {
    fn parse(text: &str) -> Option<Self> {
        match text {
            "Steadfast" => Some(Decision::Steadfast),
            "Bypass" => Some(Decision::Bypass),
            "NA" => Some(Decision::Na),
            _ => None,
        }
    }
}

/// One decision event from a vehicle log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VehicleRecord {
    /// Simulation timestep of the event.
    pub timestep: u64,
    /// Stable vehicle identifier within a scenario.
    pub vehicle_id: String,
    /// The vehicle's class.
    pub vclass: VehicleClass,
    /// The recorded decision; `Na` exactly when the class is not `Through1`.
    pub decision: Decision,
}

impl VehicleRecord {
    /// Validate the class/decision pairing: lane-1 through vehicles carry a
    /// real decision, every other class carries `NA`.
    pub fn new(
        timestep: u64,
        vehicle_id: String,
        vclass: VehicleClass,
        decision: Decision,
    ) -> std::result::Result<Self, String> {
        match (vclass, decision) {
            (VehicleClass::Through1, Decision::Na) => {
                Err("lane-1 through vehicles must carry a Steadfast/Bypass decision".to_string())
            }
            (VehicleClass::Through1, _) => {
                Ok(VehicleRecord { timestep, vehicle_id, vclass, decision })
            }
            (_, Decision::Na) => Ok(VehicleRecord { timestep, vehicle_id, vclass, decision }),
            (_, _) => Err(format!(
                "only lane-1 through vehicles carry decisions (class {vclass:?} must use NA)"
            )),
        }
    }
}

/// Result of ingesting a vehicle log.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    /// One data point per scenario that had at least one counted decision,
    /// in file order. Weight is the number of counted vehicles.
    pub dataset: Dataset,
    /// Human-readable notes about skipped scenarios.
    pub warnings: Vec<String>,
}

/// Expected first line of a vehicle log.
const LOG_HEADER: &str = "timestep,vehicle_id,vclass,decision";

/// Prefix of a scenario boundary line.
const SCENARIO_PREFIX: &str = "#scenario,";

/// Aggregate a vehicle log into observed splits.
///
/// The file format is line-oriented and processed streaming (constant memory
/// in the log length): a header line, then per-vehicle decision records
/// `timestep,vehicle_id,vclass,decision`, partitioned into scenarios by
/// boundary lines `#scenario,<id>,<n_enter>,<n_exit>,<n2>`. Other lines
/// starting with `#` are comments.
///
/// Within each scenario, a lane-1 through vehicle is counted once — at its
/// first record whose timestep falls inside the measurement window
/// `[warmup_steps, warmup_steps + window_steps)`. Scenarios with no counted
/// vehicles are skipped with a warning; if *no* scenario yields a point the
/// whole ingest fails with [`Error::NoThroughVehicles`].
pub fn ingest_vehicle_log(
    path: &Path,
    warmup_steps: u64,
    window_steps: u64,
) -> Result<IngestOutcome> {
    let file = File::open(path)?;
    parse_vehicle_log(
        &path.display().to_string(),
        BufReader::new(file),
        warmup_steps,
        window_steps,
    )
}

/// Scenario accumulator used by the log parser.
struct ScenarioTally {
    id: String,
    flows: FlowConfiguration,
    line: usize,
    steadfast: u64,
    bypass: u64,
    counted: HashSet<String>,
}

/// Streaming core of [`ingest_vehicle_log`]; takes any buffered reader so
/// tests can feed in-memory logs.
pub fn parse_vehicle_log<R: BufRead>(
    path_label: &str,
    reader: R,
    warmup_steps: u64,
    window_steps: u64,
) -> Result<IngestOutcome> {
    if window_steps == 0 {
        return Err(Error::OutOfRange {
            context: "vehicle log ingest",
            name: "window_steps",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }
    let parse_error = |line: usize, message: String| Error::Parse {
        path: path_label.to_string(),
        line,
        message,
    };
    let window_end = warmup_steps.saturating_add(window_steps);

    let mut current: Option<ScenarioTally> = None;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    let mut finalize = |tally: ScenarioTally, warnings: &mut Vec<String>| -> Result<()> {
        let decisions = tally.steadfast + tally.bypass;
        if decisions == 0 {
            warnings.push(format!(
                "{path_label}: scenario `{}` (line {}): no through-vehicle decisions in the \
                 measurement window; skipped",
                tally.id, tally.line
            ));
            return Ok(());
        }
        let observed = FlowDistribution::from_steadfast_share(
            tally.steadfast as f64 / decisions as f64,
        )
        .expect("count ratio is a probability");
        points.push(
            DataPoint::new(tally.flows, observed, decisions as f64, Some(tally.id))
                .expect("count weight is valid"),
        );
        Ok(())
    };

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let raw = line?;
        let line = raw.trim_end();
        if line_no == 1 {
            if line != LOG_HEADER {
                return Err(Error::MissingHeader { path: path_label.to_string(), line: 1 });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(SCENARIO_PREFIX) {
            if let Some(tally) = current.take() {
                finalize(tally, &mut warnings)?;
            }
            let fields: Vec<&str> = rest.split(',').collect();
            if fields.len() != 4 {
                return Err(parse_error(
                    line_no,
                    format!(
                        "scenario line needs `#scenario,<id>,<n_enter>,<n_exit>,<n2>`, \
                         found {} fields after the prefix",
                        fields.len()
                    ),
                ));
            }
            let id = fields[0].trim();
            if id.is_empty() {
                return Err(parse_error(line_no, "scenario id must not be empty".to_string()));
            }
            let share = |text: &str, name: &str| -> Result<f64> {
                text.trim().parse::<f64>().map_err(|_| {
                    parse_error(line_no, format!("field {name}: `{text}` is not a number"))
                })
            };
            let n_enter = share(fields[1], "n_enter")?;
            let n_exit = share(fields[2], "n_exit")?;
            let n2 = share(fields[3], "n2")?;
            // Headers typically print rounded shares (0.1667, ...); absorb
            // rounding noise up to 1e-3 by renormalizing, reject anything
            // farther off the simplex as a genuinely malformed header.
            let sum = n_enter + n_exit + n2;
            if !sum.is_finite() || (sum - 1.0).abs() > 1e-3 {
                return Err(parse_error(
                    line_no,
                    format!("scenario shares sum to {sum}, expected 1 (within 0.001)"),
                ));
            }
            let flows = FlowConfiguration::new(n_enter / sum, n_exit / sum, n2 / sum)
                .map_err(|e| parse_error(line_no, e.to_string()))?;
            current = Some(ScenarioTally {
                id: id.to_string(),
                flows,
                line: line_no,
                steadfast: 0,
                bypass: 0,
                counted: HashSet::new(),
            });
            continue;
        }
        if line.starts_with('#') {
            continue; // plain comment
        }

        let tally = current.as_mut().ok_or_else(|| {
            parse_error(line_no, "vehicle record appears before any #scenario line".to_string())
        })?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_error(
                line_no,
                format!("expected 4 comma-separated fields, found {}", fields.len()),
            ));
        }
        let timestep: u64 = fields[0].trim().parse().map_err(|_| {
            parse_error(line_no, format!("field timestep: `{}` is not an integer", fields[0]))
        })?;
        let vclass = VehicleClass::parse(fields[2].trim()).ok_or_else(|| {
            parse_error(line_no, format!("field vclass: unknown class `{}`", fields[2]))
        })?;
        let decision = Decision::parse(fields[3].trim()).ok_or_else(|| {
            parse_error(line_no, format!("field decision: unknown decision `{}`", fields[3]))
        })?;
        let record = VehicleRecord::new(timestep, fields[1].trim().to_string(), vclass, decision)
            .map_err(|message| parse_error(line_no, message))?;

        if record.vclass == VehicleClass::Through1
            && record.timestep >= warmup_steps
            && record.timestep < window_end
            && tally.counted.insert(record.vehicle_id.clone())
        {
            match record.decision {
                Decision::Steadfast => tally.steadfast += 1,
                Decision::Bypass => tally.bypass += 1,
                Decision::Na => unreachable!("rejected by VehicleRecord::new"),
            }
        }
    }
    if let Some(tally) = current.take() {
        finalize(tally, &mut warnings)?;
    }

    if points.is_empty() {
        return Err(Error::NoThroughVehicles);
    }
    Ok(IngestOutcome { dataset: Dataset::from_points(points), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;

    #[test]
    fn coarse_grid_enumerates_the_simplex() {
        let grid = ScenarioGrid { grid_step: 0.5, ..Default::default() };
        let configurations = generate_grid(&grid).unwrap();
        assert_eq!(configurations.len(), 6);
        let expected = [
            (0.0, 0.0, 1.0),
            (0.0, 0.5, 0.5),
            (0.0, 1.0, 0.0),
            (0.5, 0.0, 0.5),
            (0.5, 0.5, 0.0),
            (1.0, 0.0, 0.0),
        ];
        for (n, (e1, e2, e3)) in configurations.iter().zip(expected) {
            assert_eq!((n.n_enter(), n.n_exit(), n.n2()), (e1, e2, e3));
        }
    }

    #[test]
    fn default_grid_has_full_lattice_count() {
        let configurations = generate_grid(&ScenarioGrid::default()).unwrap();
        // Independent count: solutions of i + j + k = 24 over non-negative
        // integers.
        let mut expected = 0;
        for i in 0..=24 {
            for j in 0..=24 {
                for k in 0..=24 {
                    if i + j + k == 24 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(expected, 325);
        assert_eq!(configurations.len(), expected);
    }

    #[test]
    fn grids_are_sorted_and_unique() {
        let configurations = generate_grid(&ScenarioGrid::default()).unwrap();
        for pair in configurations.windows(2) {
            let a = (pair[0].n_enter(), pair[0].n_exit(), pair[0].n2());
            let b = (pair[1].n_enter(), pair[1].n_exit(), pair[1].n2());
            assert!(a < b, "not strictly ascending: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn unit_step_grid_has_the_three_corners() {
        let grid = ScenarioGrid { grid_step: 1.0, ..Default::default() };
        let configurations = generate_grid(&grid).unwrap();
        assert_eq!(configurations.len(), 3);
    }

    #[test]
    fn fixed_class_sweeps_the_first_free_axis() {
        // Lattice-aligned fixed value: 21 points, exiting share ascending.
        let grid = ScenarioGrid {
            fixed: Some((FixedClass::Enter, 4.0 / 24.0)),
            ..Default::default()
        };
        let configurations = generate_grid(&grid).unwrap();
        assert_eq!(configurations.len(), 21);
        for (k, n) in configurations.iter().enumerate() {
            assert!((n.n_enter() - 4.0 / 24.0).abs() < 1e-12);
            assert!((n.n_exit() - k as f64 / 24.0).abs() < 1e-12);
        }

        // Off-lattice fixed value: the sweep stops one step earlier.
        let grid = ScenarioGrid {
            fixed: Some((FixedClass::Enter, 0.1667)),
            ..Default::default()
        };
        assert_eq!(generate_grid(&grid).unwrap().len(), 20);

        let grid = ScenarioGrid {
            fixed: Some((FixedClass::Lane2, 0.5)),
            grid_step: 0.25,
            ..Default::default()
        };
        let configurations = generate_grid(&grid).unwrap();
        assert_eq!(configurations.len(), 3);
        for n in &configurations {
            assert_eq!(n.n2(), 0.5);
        }
    }

    #[test]
    fn inconsistent_grids_are_rejected() {
        assert!(generate_grid(&ScenarioGrid { f1: 700.0, ..Default::default() }).is_err());
        assert!(generate_grid(&ScenarioGrid { grid_step: 0.0, ..Default::default() }).is_err());
        assert!(generate_grid(&ScenarioGrid {
            fixed: Some((FixedClass::Exit, 1.5)),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn component_filter_keeps_interior_points() {
        let configurations = generate_grid(&ScenarioGrid::default()).unwrap();
        let kept = filter_components(&configurations, 0.2, 0.6).unwrap();
        assert!(!kept.is_empty());
        for n in &kept {
            for v in [n.n_enter(), n.n_exit(), n.n2()] {
                assert!((0.2..=0.6).contains(&v));
            }
        }
        assert!(matches!(
            filter_components(&configurations, 0.9, 1.0),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn reference_grid_is_frozen() {
        let grid = reference_calibration_grid();
        assert_eq!(grid.len(), REFERENCE_GRID_POINTS);
        assert_eq!(grid, reference_calibration_grid(), "preset must be reproducible");
        // The full lattice is embedded.
        let lattice = generate_grid(&ScenarioGrid::default()).unwrap();
        for point in &lattice {
            assert!(grid.contains(point), "lattice point missing: {point:?}");
        }
        // Sorted and unique.
        for pair in grid.windows(2) {
            let a = (pair[0].n_enter(), pair[0].n_exit(), pair[0].n2());
            let b = (pair[1].n_enter(), pair[1].n_exit(), pair[1].n2());
            assert!(a < b);
        }
    }

    #[test]
    fn simplex_samples_are_reproducible_and_uniform_ish() {
        let a = sample_simplex(1000, 99);
        let b = sample_simplex(1000, 99);
        assert_eq!(a, b);
        let c = sample_simplex(1000, 100);
        assert_ne!(a, c);
        let mean_enter: f64 = a.iter().map(|n| n.n_enter()).sum::<f64>() / 1000.0;
        assert!((mean_enter - 1.0 / 3.0).abs() < 0.05, "mean = {mean_enter}");
    }

    #[test]
    fn zero_noise_reproduces_predictions_exactly() {
        let reference = CostCoefficients::reference();
        let flows = sample_simplex(10, 7);
        let dataset =
            synthesize_equilibrium_noise(&flows, &reference, 0.0, 1, 123).unwrap();
        assert_eq!(dataset.len(), 10);
        for (n, point) in flows.iter().zip(dataset.points()) {
            assert_eq!(point.observed.x1_s(), predict(&reference, n).x1_s());
            assert_eq!(point.weight, 1.0);
        }
    }

    #[test]
    fn noise_synthesis_is_deterministic_and_labeled() {
        let reference = CostCoefficients::reference();
        let flows = sample_simplex(5, 11);
        let a = synthesize_equilibrium_noise(&flows, &reference, 0.05, 3, 42).unwrap();
        let b = synthesize_equilibrium_noise(&flows, &reference, 0.05, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        assert_eq!(a.points()[0].scenario_id.as_deref(), Some("c0000"));
        assert_eq!(a.points()[3].scenario_id.as_deref(), Some("c0001"));
        let c = synthesize_equilibrium_noise(&flows, &reference, 0.05, 3, 43).unwrap();
        assert_ne!(a, c, "different seeds must give different noise");
    }

    #[test]
    fn noise_averages_back_to_the_prediction() {
        let reference = CostCoefficients::reference();
        let flows =
            [FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()];
        let dataset =
            synthesize_equilibrium_noise(&flows, &reference, 0.02, 4000, 17).unwrap();
        let mean: f64 =
            dataset.points().iter().map(|p| p.observed.x1_s()).sum::<f64>() / 4000.0;
        let truth = predict(&reference, &flows[0]).x1_s();
        assert!((mean - truth).abs() < 2e-3, "mean {mean} vs truth {truth}");
    }

    #[test]
    fn logit_fixed_point_tracks_sensitivity() {
        let cfg = WeavingConfiguration::new(
            FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap(),
            CostCoefficients::reference(),
        );
        // Nearly indifferent population: stays at the even split.
        let (soft, converged) = logit_fixed_point(&cfg, 1e-9, 200);
        assert!(converged);
        assert!((soft - 0.5).abs() < 1e-6);
        // Sharp population: approaches the equilibrium share.
        let (sharp, converged) = logit_fixed_point(&cfg, 200.0, 400);
        assert!(converged);
        let equilibrium = solve_equilibrium(&cfg).distribution.x1_b();
        assert!((sharp - equilibrium).abs() < 5e-3, "sharp {sharp} vs {equilibrium}");
    }

    #[test]
    fn logit_synthesis_flags_unconverged_dynamics() {
        let reference = CostCoefficients::reference();
        let flows =
            [FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()];
        // A single bracket halving stays far wider than the convergence band.
        let outcome = synthesize_logit(&flows, &reference, 50.0, 500, 1, 5).unwrap();
        assert_eq!(outcome.non_converged, vec![0]);
        assert_eq!(outcome.dataset.len(), 1, "unconverged points are still returned");
        // A proper budget settles.
        let outcome = synthesize_logit(&flows, &reference, 50.0, 500, 200, 5).unwrap();
        assert!(outcome.non_converged.is_empty());
        assert_eq!(outcome.dataset.points()[0].weight, 500.0);
    }

    #[test]
    fn logit_synthesis_concentrates_with_large_populations() {
        let reference = CostCoefficients::reference();
        let flows =
            [FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()];
        let cfg = WeavingConfiguration::new(flows[0], reference);
        let (fixed_point, _) = logit_fixed_point(&cfg, 50.0, 200);
        let outcome = synthesize_logit(&flows, &reference, 50.0, 200_000, 200, 9).unwrap();
        let observed = outcome.dataset.points()[0].observed.x1_b();
        // Binomial std at n = 200k is ~0.0011; allow 4 sigma.
        assert!((observed - fixed_point).abs() < 4.5e-3);
    }

    #[test]
    fn logit_synthesis_is_deterministic() {
        let reference = CostCoefficients::reference();
        let flows = sample_simplex(6, 3);
        let a = synthesize_logit(&flows, &reference, 50.0, 500, 200, 21).unwrap();
        let b = synthesize_logit(&flows, &reference, 50.0, 500, 200, 21).unwrap();
        assert_eq!(a, b);
    }

    fn ingest_text(text: &str, warmup: u64, window: u64) -> Result<IngestOutcome> {
        parse_vehicle_log("test.log", text.as_bytes(), warmup, window)
    }

    #[test]
    fn ingest_counts_windowed_decisions() {
        let log = "\
timestep,vehicle_id,vclass,decision
#scenario,s1,0.25,0.25,0.5
4999,early,Through1,Bypass
5000,v1,Through1,Steadfast
6000,v2,Through1,Steadfast
7000,v3,Through1,Steadfast
8000,v4,Through1,Bypass
12000,e1,Enter,NA
19999,v5,Through1,Bypass
20000,late,Through1,Bypass
";
        let outcome = ingest_text(log, 5000, 15000).unwrap();
        assert!(outcome.warnings.is_empty());
        assert_eq!(outcome.dataset.len(), 1);
        let point = &outcome.dataset.points()[0];
        assert_eq!(point.scenario_id.as_deref(), Some("s1"));
        assert_eq!(point.weight, 5.0, "early/late records must not count");
        assert!((point.observed.x1_s() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ingest_counts_each_vehicle_once() {
        let log = "\
timestep,vehicle_id,vclass,decision
#scenario,s1,0.25,0.25,0.5
5000,v1,Through1,Steadfast
5001,v1,Through1,Bypass
5002,v2,Through1,Bypass
";
        let outcome = ingest_text(log, 5000, 15000).unwrap();
        let point = &outcome.dataset.points()[0];
        assert_eq!(point.weight, 2.0);
        assert!((point.observed.x1_s() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ingest_splits_scenarios_and_warns_on_empty_ones() {
        let log = "\
timestep,vehicle_id,vclass,decision
# free-form comment
#scenario,busy,0.25,0.25,0.5
5000,v1,Through1,Steadfast
#scenario,idle,0.5,0.25,0.25
4000,v2,Through1,Steadfast
#scenario,busy2,0.1,0.4,0.5
5000,v3,Through1,Bypass
5001,v4,Through1,Bypass
";
        let outcome = ingest_text(log, 5000, 15000).unwrap();
        assert_eq!(outcome.dataset.len(), 2);
        assert_eq!(outcome.warnings.len(), 1);
        assert!(outcome.warnings[0].contains("idle"), "warning: {}", outcome.warnings[0]);
        assert_eq!(outcome.dataset.points()[0].scenario_id.as_deref(), Some("busy"));
        assert_eq!(outcome.dataset.points()[1].scenario_id.as_deref(), Some("busy2"));
        assert_eq!(outcome.dataset.points()[1].observed.x1_b(), 1.0);
    }

    #[test]
    fn ingest_fails_when_nothing_is_counted() {
        let log = "\
timestep,vehicle_id,vclass,decision
#scenario,s1,0.25,0.25,0.5
4000,v1,Through1,Steadfast
";
        assert!(matches!(
            ingest_text(log, 5000, 15000),
            Err(Error::NoThroughVehicles)
        ));
    }

    #[test]
    fn ingest_rejects_malformed_files() {
        // Missing header.
        let err = ingest_text("5000,v1,Through1,Steadfast\n", 5000, 15000).unwrap_err();
        assert!(matches!(err, Error::MissingHeader { line: 1, .. }), "got {err}");

        // Record before any scenario.
        let log = "timestep,vehicle_id,vclass,decision\n5000,v1,Through1,Steadfast\n";
        let err = ingest_text(log, 5000, 15000).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "got {err}");

        // Decision on a non-through class.
        let log = "\
timestep,vehicle_id,vclass,decision
#scenario,s1,0.25,0.25,0.5
5000,e1,Enter,Bypass
";
        let err = ingest_text(log, 5000, 15000).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("NA"), "message: {message}");
            }
            other => panic!("expected parse error, got {other}"),
        }

        // Through vehicle without a decision.
        let log = "\
timestep,vehicle_id,vclass,decision
#scenario,s1,0.25,0.25,0.5
5000,v1,Through1,NA
";
        assert!(matches!(ingest_text(log, 5000, 15000), Err(Error::Parse { line: 3, .. })));

        // Bad timestep, off-simplex scenario, unknown class.
        let log = "timestep,vehicle_id,vclass,decision\n#scenario,s1,0.25,0.25,0.5\nxx,v1,Through1,Bypass\n";
        assert!(matches!(ingest_text(log, 0, 10), Err(Error::Parse { line: 3, .. })));
        let log = "timestep,vehicle_id,vclass,decision\n#scenario,s1,0.5,0.5,0.5\n";
        assert!(matches!(ingest_text(log, 0, 10), Err(Error::Parse { line: 2, .. })));
        let log = "timestep,vehicle_id,vclass,decision\n#scenario,s1,0.25,0.25,0.5\n5000,v1,Moped,NA\n";
        assert!(matches!(ingest_text(log, 0, 10), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn ingest_renormalizes_rounded_scenario_shares() {
        // Headers printed with four decimals miss the simplex by ~1e-4;
        // ingest absorbs that by renormalizing.
        let log = "timestep,vehicle_id,vclass,decision\n\
                   #scenario,s1,0.1667,0.1667,0.6667\n\
                   10,v1,Through1,Steadfast\n";
        let outcome = ingest_text(log, 0, 100).unwrap();
        let flows = outcome.dataset.points()[0].flows;
        let sum = flows.n_enter() + flows.n_exit() + flows.n2();
        assert!((sum - 1.0).abs() < 1e-12, "sum: {sum}");
        assert!((flows.n_enter() - 0.1667 / 1.0001).abs() < 1e-12);
    }
}
