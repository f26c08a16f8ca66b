//! Fitting cost coefficients to observed lane-choice splits.
//!
//! ## Objective
//!
//! Given observations of how the through platoon actually split under known
//! flow configurations, [`calibrate`] searches for the coefficient vector
//! whose *predicted* equilibrium splits come closest to the observed ones:
//! it minimizes the weighted mean squared error of the steadfast share over
//! the dataset. [`predict`] is the forward map being fitted — the closed-form
//! equilibrium under candidate coefficients.
//!
//! ## Search strategy
//!
//! The objective is cheap but has kinks (where a configuration's equilibrium
//! crosses between the interior and a boundary case), so the search uses a
//! bounded derivative-free simplex method with multiple restarts:
//!
//! * Stream weights `alpha`–`delta` are constrained to a box
//!   (`[1, 20]` by default — a weight below 1 would mean a stream matters
//!   less than the bare presence of traffic, outside the regime this model
//!   describes).
//! * By default the four unit costs are pinned to 1
//!   ([`CalibrationOptions::fixed_unit_costs`]); equilibria only respond to
//!   coefficient *ratios*, so fitting all ten would chase an unidentifiable
//!   overall scale. When unit costs are freed, `c1_t` stays pinned as the
//!   numéraire and the other three share the weight box.
//! * Restart starting points are drawn log-uniformly from the box, from a
//!   counter-based RNG seeded by [`CalibrationOptions::seed`]: restart `i`
//!   reads stream `i`, so results are independent of how restarts are
//!   scheduled, and the whole fit is reproducible bit for bit.
//!
//! ## Representative selection (bound snapping)
//!
//! Interchangeable weights make parts of the objective exactly flat: on
//! clean equilibrium data, trading the staying/exiting interaction weight
//! `omega` against `beta` and `delta` leaves every prediction unchanged, so
//! a whole family of coefficient vectors fits equally well. To report a
//! stable, comparable representative, each restart finishes with a
//! deterministic polish: one weight at a time (interaction weights first),
//! try pinning it to the lower bound and refitting the remaining free
//! weights; keep the pinned version when it fits essentially as well.
//! Toleranced acceptance (relative slack `1e-3`, absolute slack `1e-10`)
//! distinguishes "equally good up to search noise" from genuinely worse;
//! on noisy data a pin that costs real fit quality is rejected. Once a
//! weight is pinned (or already sits on the bound), later refits may not
//! lift it — otherwise the polish could walk back along the flat family it
//! just resolved.
//!
//! Restarts are compared by objective value; exact ties break toward the
//! lexicographically smallest coefficient vector, keeping the winner
//! deterministic under data-parallel execution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{DataPoint, Dataset};
use crate::equilibrium::solve_equilibrium;
use crate::error::{Error, Result};
use crate::exec;
use crate::flow::{CostCoefficients, FlowConfiguration, FlowDistribution, WeavingConfiguration};
use crate::optim::{minimize, Bounds, COLD_START_STEP};

/// Relative slack when deciding whether a bound-pinned refit fits "as well"
/// as the unpinned optimum (see the module docs on representative selection).
const SNAP_RELATIVE_SLACK: f64 = 1e-3;

/// Absolute slack companion to [`SNAP_RELATIVE_SLACK`]; dominates when the
/// objective is already near float precision.
const SNAP_ABSOLUTE_SLACK: f64 = 1e-10;

/// Initial simplex sizing for the warm-started refits inside the polish.
const WARM_START_STEP: f64 = 0.02;

/// Controls for [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    /// Pin all four unit costs to 1 and fit only the six stream weights
    /// (default). When `false`, `c1_t` stays pinned as the numéraire and
    /// `c2_t`, `c1_m`, `c2_m` are fitted inside the same box as the weights.
    pub fixed_unit_costs: bool,
    /// Lower edge of the search box for every fitted coefficient.
    pub lower_bound: f64,
    /// Upper edge of the search box for every fitted coefficient.
    pub upper_bound: f64,
    /// Number of independent restarts (at least 1).
    pub restarts: usize,
    /// Iteration budget per local search.
    pub max_iterations: usize,
    /// Convergence tolerance of each local search (spread of objective
    /// values across the simplex, relative to the best value).
    pub tolerance: f64,
    /// Seed for the restart starting points.
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            fixed_unit_costs: true,
            lower_bound: 1.0,
            upper_bound: 20.0,
            restarts: 16,
            max_iterations: 2000,
            tolerance: 1e-8,
            seed: 42,
        }
    }
}

impl CalibrationOptions {
    /// Check option consistency before a fit.
    pub fn validate(&self) -> Result<()> {
        let check = |name, value: f64, ok: bool, requirement| {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange { context: "calibration options", name, value, requirement })
            }
        };
        check(
            "lower_bound",
            self.lower_bound,
            self.lower_bound.is_finite() && self.lower_bound > 0.0,
            "must be finite and > 0",
        )?;
        check(
            "upper_bound",
            self.upper_bound,
            self.upper_bound.is_finite() && self.upper_bound > self.lower_bound,
            "must be finite and > lower_bound",
        )?;
        check("restarts", self.restarts as f64, self.restarts >= 1, "must be at least 1")?;
        check(
            "max_iterations",
            self.max_iterations as f64,
            self.max_iterations >= 1,
            "must be at least 1",
        )?;
        check(
            "tolerance",
            self.tolerance,
            self.tolerance.is_finite() && self.tolerance > 0.0,
            "must be finite and > 0",
        )?;
        Ok(())
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    /// The best coefficient vector found.
    pub coefficients: CostCoefficients,
    /// Weighted mean squared error of the steadfast share at
    /// [`CalibrationResult::coefficients`].
    pub objective: f64,
    /// Total local-search iterations across all restarts and polish refits.
    pub iterations_used: usize,
    /// Final (post-polish) objective of each restart, in restart order. The
    /// returned objective is the minimum of these.
    pub per_restart_objectives: Vec<f64>,
    /// True when the dataset has fewer distinct flow configurations than
    /// fitted parameters; the fit still runs, but the result is one of many
    /// that match the data equally well.
    pub degenerate: bool,
}

/// Predicted equilibrium split under `coefficients` at `flows`.
pub fn predict(
    coefficients: &CostCoefficients,
    flows: &FlowConfiguration,
) -> FlowDistribution {
    solve_equilibrium(&WeavingConfiguration::new(*flows, *coefficients)).distribution
}

/// Parameter-vector layout: which coefficients are searched, and where each
/// sits in the optimizer's flat vector.
#[derive(Clone, Copy)]
struct Layout {
    fixed_unit_costs: bool,
}

impl Layout {
    fn dimension(&self) -> usize {
        if self.fixed_unit_costs {
            6
        } else {
            9
        }
    }

    /// Positions of the six stream weights in the flat vector, in polish
    /// order: interaction weights first (`omega`, `rho`), then the remaining
    /// exchangeable weights (`beta`, `delta`), then the self-congestion
    /// weights (`alpha`, `gamma`).
    fn snap_order(&self) -> [usize; 6] {
        if self.fixed_unit_costs {
            // [alpha, beta, omega, gamma, rho, delta]
            [2, 4, 1, 5, 0, 3]
        } else {
            // [c2_t, c1_m, c2_m, alpha, beta, omega, gamma, rho, delta]
            [5, 7, 4, 8, 3, 6]
        }
    }

    fn assemble(&self, x: &[f64]) -> CostCoefficients {
        if self.fixed_unit_costs {
            CostCoefficients {
                c1_t: 1.0,
                c2_t: 1.0,
                c1_m: 1.0,
                c2_m: 1.0,
                alpha: x[0],
                beta: x[1],
                omega: x[2],
                gamma: x[3],
                rho: x[4],
                delta: x[5],
            }
        } else {
            CostCoefficients {
                c1_t: 1.0,
                c2_t: x[0],
                c1_m: x[1],
                c2_m: x[2],
                alpha: x[3],
                beta: x[4],
                omega: x[5],
                gamma: x[6],
                rho: x[7],
                delta: x[8],
            }
        }
    }
}

/// Weighted mean squared error of the predicted steadfast share.
fn mean_squared_error(
    points: &[DataPoint],
    total_weight: f64,
    coefficients: &CostCoefficients,
) -> f64 {
    let mut accumulated = 0.0;
    for point in points {
        let predicted = predict(coefficients, &point.flows).x1_s();
        let miss = predicted - point.observed.x1_s();
        accumulated += point.weight * miss * miss;
    }
    accumulated / total_weight
}

/// Fit coefficients to a dataset. See the module docs for the strategy.
///
/// # Errors
///
/// [`Error::EmptyDataset`] when the dataset has no points or zero total
/// weight; [`Error::OutOfRange`] for inconsistent options.
pub fn calibrate(data: &Dataset, options: &CalibrationOptions) -> Result<CalibrationResult> {
    options.validate()?;
    let points = data.points();
    let total_weight: f64 = points.iter().map(|p| p.weight).sum();
    if points.is_empty() || total_weight <= 0.0 {
        return Err(Error::EmptyDataset);
    }

    let layout = Layout { fixed_unit_costs: options.fixed_unit_costs };
    let dimension = layout.dimension();
    let degenerate = distinct_configurations(points) < dimension;

    let bounds = Bounds {
        lower: vec![options.lower_bound; dimension],
        upper: vec![options.upper_bound; dimension],
    };
    let objective =
        |x: &[f64]| mean_squared_error(points, total_weight, &layout.assemble(x));

    // Restart `i` draws its start from RNG stream `i`, so the set of
    // restarts is identical however they are scheduled across threads.
    let runs = exec::map_indices(options.restarts, |restart| {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(restart as u64);
        let log_lo = options.lower_bound.ln();
        let log_hi = options.upper_bound.ln();
        let start: Vec<f64> = (0..dimension)
            .map(|_| (log_lo + rng.random::<f64>() * (log_hi - log_lo)).exp())
            .collect();
        let searched = minimize(
            objective,
            &start,
            &bounds,
            options.max_iterations,
            options.tolerance,
            COLD_START_STEP,
        );
        polish_to_bounds(&objective, searched, &layout, &bounds, options)
    });

    // Sequential, order-fixed reduction; ties break toward the
    // lexicographically smallest coefficient vector.
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut per_restart_objectives = Vec::with_capacity(options.restarts);
    let mut iterations_used = 0;
    for run in runs {
        per_restart_objectives.push(run.value);
        iterations_used += run.iterations;
        let better = match &best {
            None => true,
            Some((x, value)) => {
                run.value < *value || (run.value == *value && lexicographically_less(&run.x, x))
            }
        };
        if better {
            best = Some((run.x, run.value));
        }
    }
    let (x, objective_value) = best.expect("at least one restart");

    Ok(CalibrationResult {
        coefficients: layout.assemble(&x),
        objective: objective_value,
        iterations_used,
        per_restart_objectives,
        degenerate,
    })
}

/// One restart's final state.
struct RestartRun {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
}

/// Deterministic representative selection: try pinning each stream weight to
/// the lower bound (in a fixed order), refitting the still-free coordinates,
/// and keep pins that cost essentially nothing. See the module docs.
fn polish_to_bounds<F>(
    objective: &F,
    searched: crate::optim::Minimum,
    layout: &Layout,
    bounds: &Bounds,
    options: &CalibrationOptions,
) -> RestartRun
where
    F: Fn(&[f64]) -> f64,
{
    let dimension = layout.dimension();
    let mut x = searched.x;
    let mut value = searched.value;
    let mut iterations = searched.iterations;
    let mut pinned = vec![false; dimension];

    for j in layout.snap_order() {
        if x[j] - options.lower_bound <= 1e-12 {
            // Already on the bound: make it exact and lock it in.
            x[j] = options.lower_bound;
            pinned[j] = true;
            continue;
        }
        let mut candidate = x.clone();
        candidate[j] = options.lower_bound;
        let free: Vec<usize> = (0..dimension).filter(|&k| k != j && !pinned[k]).collect();

        let (candidate, candidate_value, spent) = if free.is_empty() {
            let v = objective(&candidate);
            (candidate, v, 0)
        } else {
            let sub_start: Vec<f64> = free.iter().map(|&k| candidate[k]).collect();
            let sub_bounds = Bounds {
                lower: free.iter().map(|&k| bounds.lower[k]).collect(),
                upper: free.iter().map(|&k| bounds.upper[k]).collect(),
            };
            let expand = |sub: &[f64]| {
                let mut full = candidate.clone();
                for (&k, &v) in free.iter().zip(sub) {
                    full[k] = v;
                }
                full
            };
            let refit = minimize(
                |sub| objective(&expand(sub)),
                &sub_start,
                &sub_bounds,
                options.max_iterations,
                options.tolerance,
                WARM_START_STEP,
            );
            let full = expand(&refit.x);
            (full, refit.value, refit.iterations)
        };
        iterations += spent;

        if candidate_value <= value * (1.0 + SNAP_RELATIVE_SLACK) + SNAP_ABSOLUTE_SLACK {
            x = candidate;
            value = candidate_value;
            pinned[j] = true;
        }
    }

    RestartRun { x, value, iterations }
}

/// Number of distinct flow configurations in the data (exact component
/// comparison; configurations differing only in float noise count twice,
/// which errs on the side of not warning).
fn distinct_configurations(points: &[DataPoint]) -> usize {
    let mut triples: Vec<[f64; 3]> = points
        .iter()
        .map(|p| [p.flows.n_enter(), p.flows.n_exit(), p.flows.n2()])
        .collect();
    triples.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    triples.dedup();
    triples.len()
}

/// Strict lexicographic comparison of equal-length vectors.
fn lexicographically_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => continue,
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DataPoint;

    /// Clean observations generated by the reference coefficients on a small
    /// lattice of configurations.
    fn clean_lattice(step_count: usize) -> Dataset {
        let reference = CostCoefficients::reference();
        let mut points = Vec::new();
        for i in 0..=step_count {
            for j in 0..=(step_count - i) {
                let k = step_count - i - j;
                let flows = FlowConfiguration::new(
                    i as f64 / step_count as f64,
                    j as f64 / step_count as f64,
                    k as f64 / step_count as f64,
                )
                .unwrap();
                let observed = predict(&reference, &flows);
                points.push(DataPoint::new(flows, observed, 1.0, None).unwrap());
            }
        }
        Dataset::from_points(points)
    }

    fn quick_options() -> CalibrationOptions {
        CalibrationOptions { restarts: 4, max_iterations: 800, ..Default::default() }
    }

    #[test]
    fn predict_matches_closed_form_examples() {
        let reference = CostCoefficients::reference();
        let thirds = FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!((predict(&reference, &thirds).x1_b() - 0.4058).abs() < 1e-4);
        let lane2_only = FlowConfiguration::new(0.0, 0.0, 1.0).unwrap();
        assert!((predict(&reference, &lane2_only).x1_b() - 0.0550).abs() < 1e-4);
    }

    #[test]
    fn single_point_fit_is_perfect_and_degenerate() {
        let reference = CostCoefficients::reference();
        let thirds = FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        let observed = predict(&reference, &thirds);
        let data =
            Dataset::from_points(vec![DataPoint::new(thirds, observed, 1.0, None).unwrap()]);
        let result = calibrate(&data, &quick_options()).unwrap();
        assert!(result.objective < 1e-12, "objective = {}", result.objective);
        assert!(result.degenerate, "one configuration cannot identify six weights");
    }

    #[test]
    fn clean_grid_fit_recovers_predictions_and_bound_weights() {
        let data = clean_lattice(6); // 28 configurations
        let options = CalibrationOptions { restarts: 8, ..Default::default() };
        let result = calibrate(&data, &options).unwrap();
        assert!(result.objective < 1e-9, "objective = {}", result.objective);
        assert!(!result.degenerate);

        // Predictions must match the generator almost exactly...
        let reference = CostCoefficients::reference();
        for point in data.points() {
            let fitted = predict(&result.coefficients, &point.flows).x1_s();
            let truth = predict(&reference, &point.flows).x1_s();
            assert!(
                (fitted - truth).abs() < 2e-4,
                "prediction drift at {:?}: {fitted} vs {truth}",
                point.flows
            );
        }
        // ...and the flat interaction weights must be resolved to the
        // bound, matching the generator's representative.
        assert!(
            (result.coefficients.omega - 1.0).abs() <= 0.05,
            "omega = {}",
            result.coefficients.omega
        );
        assert!(
            (result.coefficients.rho - 1.0).abs() <= 0.05,
            "rho = {}",
            result.coefficients.rho
        );
    }

    #[test]
    fn results_are_bitwise_deterministic() {
        let data = clean_lattice(4);
        let options = quick_options();
        let a = calibrate(&data, &options).unwrap();
        let b = calibrate(&data, &options).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitted_coefficients_respect_the_box() {
        // Deliberately inconsistent observations: the fit cannot be perfect,
        // but the constraints must hold regardless.
        let flows_a = FlowConfiguration::new(0.6, 0.2, 0.2).unwrap();
        let flows_b = FlowConfiguration::new(0.1, 0.1, 0.8).unwrap();
        let data = Dataset::from_points(vec![
            DataPoint::new(flows_a, FlowDistribution::new(0.9, 0.1).unwrap(), 1.0, None).unwrap(),
            DataPoint::new(flows_b, FlowDistribution::new(0.2, 0.8).unwrap(), 1.0, None).unwrap(),
        ]);
        let options = CalibrationOptions { restarts: 3, max_iterations: 400, ..Default::default() };
        let result = calibrate(&data, &options).unwrap();
        let c = result.coefficients;
        for (name, value) in
            [("alpha", c.alpha), ("beta", c.beta), ("omega", c.omega), ("gamma", c.gamma), ("rho", c.rho), ("delta", c.delta)]
        {
            assert!((1.0..=20.0).contains(&value), "{name} = {value} escaped the box");
        }
        for (name, value) in [("c1_t", c.c1_t), ("c2_t", c.c2_t), ("c1_m", c.c1_m), ("c2_m", c.c2_m)] {
            assert_eq!(value, 1.0, "{name} must stay pinned in fixed-unit-cost mode");
        }
    }

    #[test]
    fn free_unit_costs_keep_the_numeraire_pinned() {
        let data = clean_lattice(4);
        let options = CalibrationOptions {
            fixed_unit_costs: false,
            restarts: 4,
            max_iterations: 1200,
            ..Default::default()
        };
        let result = calibrate(&data, &options).unwrap();
        assert_eq!(result.coefficients.c1_t, 1.0);
        assert!(result.objective < 1e-4, "objective = {}", result.objective);
        let c = result.coefficients;
        for value in [c.c2_t, c.c1_m, c.c2_m] {
            assert!((1.0..=20.0).contains(&value));
        }
    }

    #[test]
    fn restart_bookkeeping_is_consistent() {
        let data = clean_lattice(3);
        let options = quick_options();
        let result = calibrate(&data, &options).unwrap();
        assert_eq!(result.per_restart_objectives.len(), options.restarts);
        for (i, objective) in result.per_restart_objectives.iter().enumerate() {
            assert!(
                result.objective <= *objective,
                "restart {i} beat the returned objective: {objective} < {}",
                result.objective
            );
        }
        assert!(result.iterations_used > 0);
    }

    #[test]
    fn empty_and_weightless_datasets_are_rejected() {
        let empty = Dataset::from_points(vec![]);
        assert!(matches!(
            calibrate(&empty, &CalibrationOptions::default()),
            Err(Error::EmptyDataset)
        ));

        let flows = FlowConfiguration::new(0.25, 0.25, 0.5).unwrap();
        let observed = FlowDistribution::new(0.7, 0.3).unwrap();
        let weightless =
            Dataset::from_points(vec![DataPoint::new(flows, observed, 0.0, None).unwrap()]);
        assert!(matches!(
            calibrate(&weightless, &CalibrationOptions::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn inconsistent_options_are_rejected() {
        let data = clean_lattice(3);
        for options in [
            CalibrationOptions { restarts: 0, ..Default::default() },
            CalibrationOptions { lower_bound: 0.0, ..Default::default() },
            CalibrationOptions { upper_bound: 0.5, ..Default::default() },
            CalibrationOptions { tolerance: 0.0, ..Default::default() },
            CalibrationOptions { max_iterations: 0, ..Default::default() },
        ] {
            assert!(calibrate(&data, &options).is_err(), "accepted {options:?}");
        }
    }
}
