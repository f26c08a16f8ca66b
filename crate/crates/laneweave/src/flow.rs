//! Flow description and per-lane cost model for a weaving section.
//!
//! ## Setting
//!
//! A two-lane highway segment between an on-ramp and an off-ramp carries four
//! vehicle classes: through vehicles that start in the outer (ramp-side) lane
//! 1, through vehicles in the inner lane 2, vehicles entering from the ramp,
//! and vehicles exiting at the ramp. Entering and exiting traffic must use
//! lane 1, so a lane-1 through vehicle faces a choice: stay put (*steadfast*)
//! and absorb the friction of the merging and diverging streams, or change
//! into lane 2 (*bypass*) and absorb the friction of lane 2's own traffic
//! plus the exiting vehicles that cut across.
//!
//! ## Quantities
//!
//! Flows enter the model twice: as raw rates in vehicles per hour
//! ([`FlowRates`]), and normalized to *relative* flows ([`FlowConfiguration`])
//! where the entering, exiting, and inner-lane through flows are expressed as
//! shares of their sum. The lane-1 through platoon itself is described by a
//! [`FlowDistribution`]: the fraction `x1_s` that stays and the fraction
//! `x1_b` that bypasses.
//!
//! The perceived cost of each choice is affine in the distribution
//! ([`WeavingConfiguration::cost_steadfast`] and
//! [`WeavingConfiguration::cost_bypass`]), with weights collected in
//! [`CostCoefficients`]:
//!
//! * staying costs time in proportion to the staying share itself (`alpha`),
//!   the exiting share (`beta`), and the entering share, plus merging
//!   interactions between the staying share and the exiting (`omega`) and
//!   entering streams;
//! * bypassing costs time in proportion to the bypassing share (`gamma`) and
//!   the inner-lane share, plus merging interactions between the bypassing
//!   share and the inner-lane (`rho`) and exiting (`delta`) streams.
//!
//! Travel-time and merging terms carry separate unit costs per lane
//! (`c1_t`, `c1_m`, `c2_t`, `c2_m`), so the coefficient vector is only
//! identified up to overall scale — doubling all four unit costs doubles both
//! costs and moves no equilibrium.
//!
//! ## Construction guarantees
//!
//! Share vectors are validated on construction: every component must lie in
//! `[0, 1]` and the components must sum to 1. Sums that deviate by at most
//! `1e-9` are silently renormalized — enough to absorb float noise from file
//! round-trips without masking genuinely bad data — and worse deviations are
//! rejected. After construction the sum is exact to within `1e-12`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest deviation of a component sum from 1 that constructors repair by
/// renormalizing; anything worse is rejected as data corruption.
const RENORMALIZE_BOUND: f64 = 1e-9;

/// Validate `parts` as a point on the unit simplex, renormalizing small
/// deviations. See the module docs for the tolerance policy.
fn unit_simplex<const N: usize>(context: &'static str, mut parts: [f64; N]) -> Result<[f64; N]> {
    for (value, name) in parts.iter().zip(COMPONENT_NAMES) {
        if !value.is_finite() || *value < -1e-12 || *value > 1.0 + RENORMALIZE_BOUND {
            return Err(Error::OutOfRange {
                context,
                name,
                value: *value,
                requirement: "must lie in [0, 1]",
            });
        }
    }
    for value in &mut parts {
        *value = value.clamp(0.0, 1.0);
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_BOUND {
        return Err(Error::OffSimplex { context, sum });
    }
    for value in &mut parts {
        *value /= sum;
    }
    Ok(parts)
}

/// Positional names used in out-of-range diagnostics from [`unit_simplex`].
const COMPONENT_NAMES: [&str; 3] = ["component 1", "component 2", "component 3"];

/// Raw demand at the weaving section, in vehicles per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRates {
    /// Vehicles entering from the on-ramp.
    pub f_enter: f64,
    /// Vehicles leaving at the off-ramp.
    pub f_exit: f64,
    /// Through vehicles in the inner lane 2.
    pub f2: f64,
    /// Through vehicles in the outer lane 1 (the deciding platoon).
    pub f1: f64,
}

impl FlowRates {
    /// Validate raw rates: all finite and non-negative, with a strictly
    /// positive lane-1 through flow (otherwise there is nobody to decide).
    pub fn new(f_enter: f64, f_exit: f64, f2: f64, f1: f64) -> Result<Self> {
        let check = |name, value: f64, strict: bool| -> Result<()> {
            let ok = value.is_finite() && if strict { value > 0.0 } else { value >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange {
                    context: "flow rates",
                    name,
                    value,
                    requirement: if strict {
                        "must be finite and > 0"
                    } else {
                        "must be finite and >= 0"
                    },
                })
            }
        };
        check("f_enter", f_enter, false)?;
        check("f_exit", f_exit, false)?;
        check("f2", f2, false)?;
        check("f1", f1, true)?;
        Ok(FlowRates { f_enter, f_exit, f2, f1 })
    }

    /// Normalize the neighbor flows (entering, exiting, inner-lane) to shares
    /// of their sum.
    ///
    /// Costs are driven by the *relative* pressure of the three streams a
    /// lane-1 through vehicle interacts with, so the through flow `f1` is
    /// deliberately not part of the denominator.
    ///
    /// # Errors
    ///
    /// [`Error::ZeroNeighborFlow`] if all three neighbor flows are zero.
    pub fn normalize(&self) -> Result<FlowConfiguration> {
        let total = self.f_enter + self.f_exit + self.f2;
        if total <= 0.0 {
            return Err(Error::ZeroNeighborFlow);
        }
        FlowConfiguration::new(self.f_enter / total, self.f_exit / total, self.f2 / total)
    }
}

/// Relative flows of the three streams that interact with the lane-1 through
/// platoon: entering, exiting, and inner-lane through traffic.
///
/// Components live on the unit simplex (each in `[0, 1]`, summing to 1 within
/// `1e-12`); see the module docs for the construction tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfiguration {
    n_enter: f64,
    n_exit: f64,
    n2: f64,
}

impl FlowConfiguration {
    /// Validate a share triple, renormalizing sums within `1e-9` of 1.
    pub fn new(n_enter: f64, n_exit: f64, n2: f64) -> Result<Self> {
        let [n_enter, n_exit, n2] = unit_simplex("flow configuration", [n_enter, n_exit, n2])?;
        Ok(FlowConfiguration { n_enter, n_exit, n2 })
    }

    /// Share of entering (on-ramp) traffic.
    pub fn n_enter(&self) -> f64 {
        self.n_enter
    }

    /// Share of exiting (off-ramp) traffic.
    pub fn n_exit(&self) -> f64 {
        self.n_exit
    }

    /// Share of inner-lane through traffic.
    pub fn n2(&self) -> f64 {
        self.n2
    }
}

/// How the lane-1 through platoon splits between its two strategies: the
/// share `x1_s` that stays in lane 1 and the share `x1_b` that bypasses via
/// lane 2. The two shares sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowDistribution {
    x1_s: f64,
    x1_b: f64,
}

impl FlowDistribution {
    /// Validate a share pair, renormalizing sums within `1e-9` of 1.
    pub fn new(x1_s: f64, x1_b: f64) -> Result<Self> {
        // Reuse the triple validator with a zero third component; the names in
        // any diagnostic stay positional.
        let [x1_s, x1_b, _] = unit_simplex("flow distribution", [x1_s, x1_b, 0.0])?;
        Ok(FlowDistribution { x1_s, x1_b })
    }

    /// Build a distribution from the bypass share alone; the steadfast share
    /// is the exact complement, so the pair sums to 1 with no rounding.
    ///
    /// Values within `1e-12` outside `[0, 1]` are clamped (they arise from
    /// float arithmetic in callers); worse values are rejected.
    pub fn from_bypass_share(x1_b: f64) -> Result<Self> {
        if !x1_b.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&x1_b) {
            return Err(Error::OutOfRange {
                context: "flow distribution",
                name: "x1_b",
                value: x1_b,
                requirement: "must lie in [0, 1]",
            });
        }
        let x1_b = x1_b.clamp(0.0, 1.0);
        Ok(FlowDistribution { x1_s: 1.0 - x1_b, x1_b })
    }

    /// Build a distribution from the steadfast share alone; the bypass share
    /// is the exact complement. Mirrors [`FlowDistribution::from_bypass_share`].
    pub fn from_steadfast_share(x1_s: f64) -> Result<Self> {
        if !x1_s.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&x1_s) {
            return Err(Error::OutOfRange {
                context: "flow distribution",
                name: "x1_s",
                value: x1_s,
                requirement: "must lie in [0, 1]",
            });
        }
        let x1_s = x1_s.clamp(0.0, 1.0);
        Ok(FlowDistribution { x1_s, x1_b: 1.0 - x1_s })
    }

    /// Share of the platoon staying in lane 1.
    pub fn x1_s(&self) -> f64 {
        self.x1_s
    }

    /// Share of the platoon bypassing via lane 2.
    pub fn x1_b(&self) -> f64 {
        self.x1_b
    }
}

/// Weights of the affine cost model. All ten must be finite and strictly
/// positive.
///
/// `alpha`–`delta` shape how strongly each traffic stream is felt; the four
/// unit costs convert travel-time (`c1_t`, `c2_t`) and merging (`c1_m`,
/// `c2_m`) terms into a common cost unit per lane. Costs are homogeneous of
/// degree one in the unit costs, so only their ratios matter to equilibrium
/// behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostCoefficients {
    /// Unit cost of lane-1 travel-time terms.
    pub c1_t: f64,
    /// Unit cost of lane-2 travel-time terms.
    pub c2_t: f64,
    /// Unit cost of lane-1 merging-interaction terms.
    pub c1_m: f64,
    /// Unit cost of lane-2 merging-interaction terms.
    pub c2_m: f64,
    /// Self-congestion weight of the staying share in lane-1 travel time.
    pub alpha: f64,
    /// Weight of the exiting share in lane-1 travel time.
    pub beta: f64,
    /// Weight of the staying/exiting merging interaction in lane 1.
    pub omega: f64,
    /// Self-congestion weight of the bypassing share in lane-2 travel time.
    pub gamma: f64,
    /// Weight of the bypassing/inner-lane merging interaction in lane 2.
    pub rho: f64,
    /// Weight of the bypassing/exiting merging interaction in lane 2.
    pub delta: f64,
}

impl CostCoefficients {
    /// Validate a full coefficient set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        c1_t: f64,
        c2_t: f64,
        c1_m: f64,
        c2_m: f64,
        alpha: f64,
        beta: f64,
        omega: f64,
        gamma: f64,
        rho: f64,
        delta: f64,
    ) -> Result<Self> {
        let coefficients =
            CostCoefficients { c1_t, c2_t, c1_m, c2_m, alpha, beta, omega, gamma, rho, delta };
        coefficients.validate()?;
        Ok(coefficients)
    }

    /// Re-check the positivity invariant (used after field-by-field
    /// construction, for example by file parsers).
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named_fields() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::OutOfRange {
                    context: "cost coefficients",
                    name,
                    value,
                    requirement: "must be finite and > 0",
                });
            }
        }
        Ok(())
    }

    /// Reference coefficient set, calibrated against a microsimulation study
    /// of a 1400 veh/h weaving section. Used as the default synthetic-data
    /// generator and as the baseline in sensitivity comparisons.
    pub fn reference() -> Self {
        CostCoefficients {
            c1_t: 1.0,
            c2_t: 1.0,
            c1_m: 1.0,
            c2_m: 1.0,
            alpha: 1.255,
            beta: 1.138,
            omega: 1.000,
            gamma: 2.384,
            rho: 1.000,
            delta: 3.094,
        }
    }

    /// All ten fields with their API names, in a fixed canonical order
    /// (unit costs first, then the stream weights).
    pub fn named_fields(&self) -> [(&'static str, f64); 10] {
        [
            ("c1_t", self.c1_t),
            ("c2_t", self.c2_t),
            ("c1_m", self.c1_m),
            ("c2_m", self.c2_m),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("omega", self.omega),
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("delta", self.delta),
        ]
    }
}

/// A fully specified decision situation: the relative flows around the
/// platoon plus the cost weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeavingConfiguration {
    /// Relative flows of the interacting streams.
    pub flows: FlowConfiguration,
    /// Cost model weights.
    pub coefficients: CostCoefficients,
}

impl WeavingConfiguration {
    /// Bundle flows and coefficients (both already validated by their own
    /// constructors).
    pub fn new(flows: FlowConfiguration, coefficients: CostCoefficients) -> Self {
        WeavingConfiguration { flows, coefficients }
    }

    /// Perceived cost of staying in lane 1, affine in the staying share:
    /// travel time driven by the staying, exiting, and entering streams, plus
    /// merging interactions between the stayers and the exiting/entering
    /// streams.
    #[inline]
    pub fn cost_steadfast(&self, x: &FlowDistribution) -> f64 {
        let n = &self.flows;
        let c = &self.coefficients;
        c.c1_t * (c.alpha * x.x1_s + c.beta * n.n_exit + n.n_enter)
            + c.c1_m * (c.omega * x.x1_s * n.n_exit + x.x1_s * n.n_enter)
    }

    /// Perceived cost of bypassing via lane 2, affine in the bypassing share:
    /// travel time driven by the bypassing and inner-lane streams, plus
    /// merging interactions between the bypassers and the inner-lane/exiting
    /// streams.
    #[inline]
    pub fn cost_bypass(&self, x: &FlowDistribution) -> f64 {
        let n = &self.flows;
        let c = &self.coefficients;
        c.c2_t * (c.gamma * x.x1_b + n.n2)
            + c.c2_m * (c.rho * x.x1_b * n.n2 + c.delta * x.x1_b * n.n_exit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn thirds() -> FlowConfiguration {
        FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn normalize_divides_by_neighbor_sum() {
        let rates = FlowRates::new(200.0, 200.0, 200.0, 800.0).unwrap();
        let n = rates.normalize().unwrap();
        assert!((n.n_enter() - 1.0 / 3.0).abs() < 1e-15);
        assert!((n.n_exit() - 1.0 / 3.0).abs() < 1e-15);
        assert!((n.n2() - 1.0 / 3.0).abs() < 1e-15);

        let rates = FlowRates::new(300.0, 100.0, 200.0, 800.0).unwrap();
        let n = rates.normalize().unwrap();
        assert!((n.n_enter() - 0.5).abs() < 1e-15);
        assert!((n.n_exit() - 1.0 / 6.0).abs() < 1e-15);
        assert!((n.n2() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_rejects_all_zero_neighbors() {
        let rates = FlowRates::new(0.0, 0.0, 0.0, 800.0).unwrap();
        assert!(matches!(rates.normalize(), Err(Error::ZeroNeighborFlow)));
    }

    #[test]
    fn flow_rates_reject_bad_values() {
        assert!(FlowRates::new(-1.0, 0.0, 0.0, 800.0).is_err());
        assert!(FlowRates::new(0.0, f64::NAN, 0.0, 800.0).is_err());
        assert!(FlowRates::new(0.0, 0.0, 0.0, 0.0).is_err(), "f1 must be positive");
    }

    #[test]
    fn configuration_renormalizes_small_deviations() {
        // Deviation of 6e-10 is inside the repair bound.
        let n = FlowConfiguration::new(0.2 + 2e-10, 0.3 + 2e-10, 0.5 + 2e-10).unwrap();
        let sum = n.n_enter() + n.n_exit() + n.n2();
        assert!((sum - 1.0).abs() <= 1e-12, "sum after renormalization: {sum}");
    }

    #[test]
    fn configuration_rejects_large_deviations() {
        let result = FlowConfiguration::new(0.2, 0.3, 0.5 + 1e-8);
        assert!(matches!(result, Err(Error::OffSimplex { .. })));
    }

    #[test]
    fn configuration_rejects_out_of_range_components() {
        assert!(FlowConfiguration::new(-0.1, 0.6, 0.5).is_err());
        assert!(FlowConfiguration::new(1.2, -0.1, -0.1).is_err());
        assert!(FlowConfiguration::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn distribution_from_bypass_share_is_exact_complement() {
        let x = FlowDistribution::from_bypass_share(0.25).unwrap();
        assert_eq!(x.x1_s(), 0.75);
        assert_eq!(x.x1_b(), 0.25);
        assert_eq!(x.x1_s() + x.x1_b(), 1.0);
        assert!(FlowDistribution::from_bypass_share(1.0 + 1e-10).is_err());
        assert!(FlowDistribution::from_bypass_share(-1e-10).is_err());
        // Float-noise values just outside the interval are clamped.
        let x = FlowDistribution::from_bypass_share(-1e-13).unwrap();
        assert_eq!(x.x1_b(), 0.0);
    }

    #[test]
    fn coefficients_must_be_positive() {
        assert!(CostCoefficients::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(CostCoefficients::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -2.0, 1.0, 1.0).is_err());
        assert!(
            CostCoefficients::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, f64::INFINITY, 1.0, 1.0)
                .is_err()
        );
        assert!(CostCoefficients::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn steadfast_cost_matches_hand_computation() {
        // Reference coefficients at equal thirds with the whole platoon
        // staying: 1.255 + 1.138/3 + 1/3 + (1/3 + 1/3) = 1.255 + 4.138/3.
        let cfg = WeavingConfiguration::new(thirds(), CostCoefficients::reference());
        let all_stay = FlowDistribution::from_bypass_share(0.0).unwrap();
        let expected = 1.255 + 4.138 / 3.0;
        assert!((cfg.cost_steadfast(&all_stay) - expected).abs() < 1e-12);
    }

    #[test]
    fn bypass_cost_matches_hand_computation() {
        // With nobody bypassing, the bypass cost is just the inner-lane term.
        let cfg = WeavingConfiguration::new(thirds(), CostCoefficients::reference());
        let all_stay = FlowDistribution::from_bypass_share(0.0).unwrap();
        assert!((cfg.cost_bypass(&all_stay) - 1.0 / 3.0).abs() < 1e-15);

        // Whole platoon bypassing: 2.384 + 1/3 + (1/3 + 3.094/3).
        let all_bypass = FlowDistribution::from_bypass_share(1.0).unwrap();
        let expected = 2.384 + 1.0 / 3.0 + (1.0 / 3.0 + 3.094 / 3.0);
        assert!((cfg.cost_bypass(&all_bypass) - expected).abs() < 1e-12);
    }

    /// Strategy: a random flow configuration via two uniform cuts.
    fn any_configuration() -> impl Strategy<Value = FlowConfiguration> {
        (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            FlowConfiguration::new(lo, hi - lo, 1.0 - hi).unwrap()
        })
    }

    /// Strategy: a random positive coefficient set.
    fn any_coefficients() -> impl Strategy<Value = CostCoefficients> {
        proptest::collection::vec(0.1..10.0f64, 10).prop_map(|v| {
            CostCoefficients::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9])
                .unwrap()
        })
    }

    proptest! {
        /// Both costs are affine in the distribution: the value at the
        /// midpoint of two distributions equals the mean of the endpoint
        /// values (to float precision).
        #[test]
        fn costs_are_affine_in_distribution(
            n in any_configuration(),
            c in any_coefficients(),
            xa in 0.0..1.0f64,
            xb in 0.0..1.0f64,
        ) {
            let cfg = WeavingConfiguration::new(n, c);
            let a = FlowDistribution::from_bypass_share(xa).unwrap();
            let b = FlowDistribution::from_bypass_share(xb).unwrap();
            let mid = FlowDistribution::from_bypass_share(0.5 * (xa + xb)).unwrap();
            for cost in [WeavingConfiguration::cost_steadfast, WeavingConfiguration::cost_bypass] {
                let lhs = cost(&cfg, &mid);
                let rhs = 0.5 * (cost(&cfg, &a) + cost(&cfg, &b));
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()),
                    "affinity violated: {lhs} vs {rhs}");
            }
        }

        /// Costs are homogeneous of degree one in the four unit costs.
        #[test]
        fn costs_scale_with_unit_costs(
            n in any_configuration(),
            c in any_coefficients(),
            x in 0.0..1.0f64,
            k in 0.01..100.0f64,
        ) {
            let scaled = CostCoefficients {
                c1_t: k * c.c1_t,
                c2_t: k * c.c2_t,
                c1_m: k * c.c1_m,
                c2_m: k * c.c2_m,
                ..c
            };
            let cfg = WeavingConfiguration::new(n, c);
            let cfg_scaled = WeavingConfiguration::new(n, scaled);
            let x = FlowDistribution::from_bypass_share(x).unwrap();
            for cost in [WeavingConfiguration::cost_steadfast, WeavingConfiguration::cost_bypass] {
                let base = cost(&cfg, &x);
                let up = cost(&cfg_scaled, &x);
                prop_assert!((up - k * base).abs() <= 1e-12 * (1.0 + up.abs()));
            }
        }

        /// Shifting weight from the inner lane to the exiting stream raises
        /// the staying cost (the exiting stream hits lane 1 twice, via both
        /// the travel-time and merging terms, while the inner lane does not
        /// appear in lane-1 costs at all).
        #[test]
        fn steadfast_cost_increases_with_exit_share(
            n in any_configuration(),
            c in any_coefficients(),
            x in 0.0..1.0f64,
            shift in 0.0..1.0f64,
        ) {
            let room = n.n2();
            prop_assume!(room > 1e-9);
            let shift = shift * room;
            prop_assume!(shift > 1e-12);
            let moved = FlowConfiguration::new(n.n_enter(), n.n_exit() + shift, n.n2() - shift)
                .unwrap();
            let x = FlowDistribution::from_bypass_share(x).unwrap();
            let before = WeavingConfiguration::new(n, c).cost_steadfast(&x);
            let after = WeavingConfiguration::new(moved, c).cost_steadfast(&x);
            prop_assert!(after > before, "expected increase: {before} -> {after}");
        }

        /// Shifting weight from the entering stream to the inner lane raises
        /// the bypass cost and lowers the staying cost.
        #[test]
        fn lane2_pressure_moves_costs_apart(
            n in any_configuration(),
            c in any_coefficients(),
            x in 0.0..1.0f64,
            shift in 0.0..1.0f64,
        ) {
            let room = n.n_enter();
            prop_assume!(room > 1e-9);
            let shift = shift * room;
            prop_assume!(shift > 1e-12);
            let moved = FlowConfiguration::new(n.n_enter() - shift, n.n_exit(), n.n2() + shift)
                .unwrap();
            let x = FlowDistribution::from_bypass_share(x).unwrap();
            let before = WeavingConfiguration::new(n, c);
            let after = WeavingConfiguration::new(moved, c);
            prop_assert!(after.cost_bypass(&x) >= before.cost_bypass(&x));
            prop_assert!(after.cost_steadfast(&x) < before.cost_steadfast(&x));
        }
    }
}
