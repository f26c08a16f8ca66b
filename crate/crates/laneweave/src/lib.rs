//! Strategic lane choice at highway weaving sections.
//!
//! Between an on-ramp and a nearby off-ramp, through vehicles in the outer
//! lane face a decision: stay and absorb the friction of entering and
//! exiting traffic, or change into the inner lane and absorb its traffic
//! instead. When every vehicle picks the cheaper option, the platoon settles
//! into an equilibrium split where no single vehicle gains by switching.
//! This crate models that split and everything needed to put the model to
//! work:
//!
//! * [`solve_equilibrium`] — the equilibrium split of the through platoon
//!   under an affine cost model ([`flow`]), in closed form, with
//!   [`equilibrium_residual`] as the accompanying optimality measure;
//! * [`calibrate`] — fit the cost coefficients to observed splits by
//!   weighted least squares (bounded multi-start simplex search with a
//!   deterministic polish toward the coefficient box's lower edges);
//! * [`validate`] and [`fluctuating_rate`] — score predictions against
//!   observations (mean percent error) and compare coefficient sets across
//!   conditions;
//! * [`datagen`] — scenario grids over the flow simplex, two synthetic
//!   observation oracles (noisy-equilibrium and logit-population), and a
//!   vehicle-log ingester for external microsimulation output;
//! * [`dataset`] — a small CSV observation format that survives round trips.
//!
//! Results are deterministic: fixed seeds drive every random draw, and the
//! `parallel` feature (enabled by default, via rayon) only reorders work
//! whose outputs are collected back in input order, so parallel and
//! sequential builds produce bit-for-bit identical numbers.
//!
//! # Example
//!
//! ```
//! use laneweave::{
//!     solve_equilibrium, CostCoefficients, EquilibriumCase, FlowConfiguration,
//!     WeavingConfiguration,
//! };
//!
//! // Entering, exiting, and inner-lane traffic in equal shares.
//! let flows = FlowConfiguration::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)?;
//! let outcome = solve_equilibrium(&WeavingConfiguration::new(
//!     flows,
//!     CostCoefficients::reference(),
//! ));
//!
//! // Some of the platoon bypasses, and at equilibrium neither strategy is
//! // strictly cheaper.
//! assert_eq!(outcome.case, EquilibriumCase::Interior);
//! assert!(outcome.cost_gap_at_solution.abs() < 1e-12);
//! # Ok::<(), laneweave::Error>(())
//! ```

pub mod calibration;
pub mod datagen;
pub mod dataset;
pub mod equilibrium;
pub mod error;
pub mod flow;
pub mod metrics;

mod exec;
mod optim;

pub use calibration::{calibrate, predict, CalibrationOptions, CalibrationResult};
pub use datagen::{
    filter_components, generate_grid, ingest_vehicle_log, logit_fixed_point,
    reference_calibration_grid, sample_simplex, synthesize_equilibrium_noise, synthesize_logit,
    FixedClass, IngestOutcome, LogitSynthesis, ScenarioGrid,
};
pub use dataset::{DataPoint, Dataset};
pub use equilibrium::{
    equilibrium_residual, solve_all, solve_equilibrium, EquilibriumCase, EquilibriumResult,
};
pub use error::{Error, Result};
pub use flow::{
    CostCoefficients, FlowConfiguration, FlowDistribution, FlowRates, WeavingConfiguration,
};
pub use metrics::{
    fluctuating_rate, mper, validate, FluctuationReport, GroupBy, MeanPercentError,
    ValidationReport, DEFAULT_FR_THRESHOLD,
};
