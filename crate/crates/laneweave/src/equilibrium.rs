//! Equilibrium split of the lane-1 through platoon between staying and
//! bypassing.
//!
//! ## Equilibrium condition
//!
//! Each through vehicle picks the cheaper strategy given what everyone else
//! does. A distribution is in equilibrium when no used strategy is more
//! expensive than the alternative: whenever a positive share stays, staying
//! costs no more than bypassing, and vice versa. Formally, with
//! `g(x) = cost_steadfast(x) - cost_bypass(x)`,
//!
//! ```text
//! x1_s * g(x) <= 0   and   x1_b * g(x) >= 0
//! ```
//!
//! [`equilibrium_residual`] turns the two conditions into a single
//! non-negative violation measure (zero exactly at equilibrium).
//!
//! ## Closed form
//!
//! Both costs are affine in the bypass share: as more vehicles bypass,
//! staying gets cheaper at rate `c1_t*alpha + c1_m*(omega*n_exit + n_enter)`
//! and bypassing gets dearer at rate `c2_t*gamma + c2_m*(rho*n2 +
//! delta*n_exit)`. The cost gap `g` is therefore strictly decreasing in
//! `x1_b`, and the equilibrium is the unique point where `g` crosses zero,
//! clamped to the feasible interval:
//!
//! * `g(0) <= 0` — staying is weakly cheaper even with the whole platoon in
//!   lane 1: nobody bypasses ([`EquilibriumCase::AllSteadfast`]).
//! * `g(1) >= 0` — bypassing is weakly cheaper even with the whole platoon in
//!   lane 2: everybody bypasses ([`EquilibriumCase::AllBypass`]).
//! * otherwise the platoon splits so both strategies cost the same
//!   ([`EquilibriumCase::Interior`]).
//!
//! Exact ties at a boundary (`g(0) = 0` or `g(1) = 0`) classify as the
//! boundary case with a zero cost gap.
//!
//! Because the equilibrium is a zero of a cost *difference*, it is invariant
//! under a common rescaling of the four unit costs.

use serde::Serialize;

use crate::exec;
use crate::flow::{CostCoefficients, FlowConfiguration, FlowDistribution, WeavingConfiguration};

/// Which branch of the closed form the solution landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumCase {
    /// The whole platoon stays in lane 1 (`x1_b = 0`).
    AllSteadfast,
    /// The platoon splits and both strategies cost the same.
    Interior,
    /// The whole platoon bypasses via lane 2 (`x1_b = 1`).
    AllBypass,
}

impl std::fmt::Display for EquilibriumCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            EquilibriumCase::AllSteadfast => "all-steadfast",
            EquilibriumCase::Interior => "interior",
            EquilibriumCase::AllBypass => "all-bypass",
        };
        f.write_str(label)
    }
}

/// An equilibrium solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumResult {
    /// The equilibrium split of the platoon.
    pub distribution: FlowDistribution,
    /// Which branch of the closed form applied.
    pub case: EquilibriumCase,
    /// `cost_steadfast - cost_bypass` evaluated at the solution. Zero (to
    /// float precision) in the interior case; `<= 0` when everybody stays
    /// (staying is weakly cheaper) and `>= 0` when everybody bypasses.
    pub cost_gap_at_solution: f64,
}

/// Solve for the unique equilibrium split of the platoon.
///
/// Runs in constant time via the closed form described in the module docs.
pub fn solve_equilibrium(configuration: &WeavingConfiguration) -> EquilibriumResult {
    let n = &configuration.flows;
    let c = &configuration.coefficients;

    let nobody_bypasses =
        FlowDistribution::from_bypass_share(0.0).expect("0 is a valid bypass share");
    let gap_at_zero = configuration.cost_steadfast(&nobody_bypasses)
        - configuration.cost_bypass(&nobody_bypasses);

    // Rates at which the gap closes as the bypass share grows.
    let steadfast_relief = c.c1_t * c.alpha + c.c1_m * (c.omega * n.n_exit() + n.n_enter());
    let bypass_pressure = c.c2_t * c.gamma + c.c2_m * (c.rho * n.n2() + c.delta * n.n_exit());
    let gap_slope = steadfast_relief + bypass_pressure;
    // Strictly positive because gamma and c2_t are: the gap always crosses.
    debug_assert!(gap_slope > 0.0);

    if gap_at_zero <= 0.0 {
        return EquilibriumResult {
            distribution: nobody_bypasses,
            case: EquilibriumCase::AllSteadfast,
            cost_gap_at_solution: gap_at_zero,
        };
    }
    if gap_at_zero >= gap_slope {
        // The gap at x1_b = 1 is computed from the same two quantities that
        // decided the branch, so the sign invariant (>= 0) holds exactly.
        return EquilibriumResult {
            distribution: FlowDistribution::from_bypass_share(1.0)
                .expect("1 is a valid bypass share"),
            case: EquilibriumCase::AllBypass,
            cost_gap_at_solution: gap_at_zero - gap_slope,
        };
    }

    let x1_b = gap_at_zero / gap_slope;
    let distribution =
        FlowDistribution::from_bypass_share(x1_b).expect("interior share lies in (0, 1)");
    let cost_gap_at_solution =
        configuration.cost_steadfast(&distribution) - configuration.cost_bypass(&distribution);
    EquilibriumResult { distribution, case: EquilibriumCase::Interior, cost_gap_at_solution }
}

/// Non-negative violation of the equilibrium conditions at `x`: zero exactly
/// at equilibrium, positive everywhere else.
///
/// Each term penalizes a used strategy that costs more than its alternative,
/// weighted by how much of the platoon uses it.
pub fn equilibrium_residual(configuration: &WeavingConfiguration, x: &FlowDistribution) -> f64 {
    let gap = configuration.cost_steadfast(x) - configuration.cost_bypass(x);
    (x.x1_s() * gap).max(0.0) + (-x.x1_b() * gap).max(0.0)
}

/// Solve one coefficient set against many flow configurations.
///
/// Results come back in input order. With the `parallel` feature the batch is
/// data-parallel; every element is solved independently, so the feature
/// changes wall-clock time only, never values.
pub fn solve_all(
    coefficients: &CostCoefficients,
    flows: &[FlowConfiguration],
) -> Vec<EquilibriumResult> {
    exec::map_slice(flows, |n| {
        solve_equilibrium(&WeavingConfiguration::new(*n, *coefficients))
    })
}
