//! Observation records and their CSV round-trip.
//!
//! A [`DataPoint`] pairs a flow configuration with the lane-choice split
//! observed there, plus a weight (typically the number of vehicles behind
//! the observation) and an optional scenario label. A [`Dataset`] is an
//! ordered collection of points with file I/O.
//!
//! ## File format
//!
//! One header line, then one record per line:
//!
//! ```text
//! scenario_id,n_enter,n_exit,n2,x1_s,x1_b,weight
//! c0001,0.166666667,0.333333333,0.5,0.594203704,0.405796296,1
//! ```
//!
//! * Floats are serialized with 9 significant digits. Within each simplex
//!   pair/triple the *last* component is serialized as the 9-digit rounding
//!   of 1 minus the other serialized components, so that every written row
//!   re-validates under the constructors' `1e-9` renormalization bound
//!   (independent rounding of three components can drift the sum by up to
//!   `1.5e-9`, which would make a freshly written file unreadable).
//! * `scenario_id` may be empty (no label) and must not contain commas,
//!   newlines, or leading/trailing whitespace.
//! * `weight` is written as an integer when it is one.
//!
//! Parse failures report the file path and 1-based line number.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{FlowConfiguration, FlowDistribution};

/// Expected header of a dataset file.
const HEADER: &str = "scenario_id,n_enter,n_exit,n2,x1_s,x1_b,weight";

/// One observed lane-choice outcome at one flow configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataPoint {
    /// Relative flows under which the observation was made.
    pub flows: FlowConfiguration,
    /// Observed split of the through platoon.
    pub observed: FlowDistribution,
    /// Observation weight; finite and non-negative (commonly a vehicle
    /// count, or 1 for unweighted data).
    pub weight: f64,
    /// Optional scenario label carried through reports.
    pub scenario_id: Option<String>,
}

impl DataPoint {
    /// Validate and assemble a data point.
    pub fn new(
        flows: FlowConfiguration,
        observed: FlowDistribution,
        weight: f64,
        scenario_id: Option<String>,
    ) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::OutOfRange {
                context: "data point",
                name: "weight",
                value: weight,
                requirement: "must be finite and >= 0",
            });
        }
        Ok(DataPoint { flows, observed, weight, scenario_id })
    }
}

/// An ordered collection of observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Dataset {
    points: Vec<DataPoint>,
}

impl Dataset {
    /// Wrap a list of points.
    pub fn from_points(points: Vec<DataPoint>) -> Self {
        Dataset { points }
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the dataset has no points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The points, in insertion order.
    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    /// Append one point.
    pub fn push(&mut self, point: DataPoint) {
        self.points.push(point);
    }

    /// Serialize to the CSV format described in the module docs.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.points.len() + 1));
        out.push_str(HEADER);
        out.push('\n');
        for p in &self.points {
            let n_enter = format_significant(p.flows.n_enter(), 9);
            let n_exit = format_significant(p.flows.n_exit(), 9);
            // Write the last simplex component as the rounding of the exact
            // complement of the *serialized* leading components, so the row
            // re-validates on read (see module docs).
            let n2_value = 1.0 - parse_back(&n_enter) - parse_back(&n_exit);
            let n2 = format_significant(n2_value.max(0.0), 9);
            let x1_s = format_significant(p.observed.x1_s(), 9);
            let x1_b_value = 1.0 - parse_back(&x1_s);
            let x1_b = format_significant(x1_b_value.max(0.0), 9);
            let id = p.scenario_id.as_deref().unwrap_or("");
            debug_assert!(is_valid_label(id), "scenario label {id:?} breaks the CSV format");
            let _ = writeln!(
                out,
                "{id},{n_enter},{n_exit},{n2},{x1_s},{x1_b},{}",
                format_weight(p.weight)
            );
        }
        out
    }

    /// Write the CSV serialization to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse the CSV format described in the module docs.
    pub fn from_csv(path_label: &str, text: &str) -> Result<Self> {
        let parse_error = |line: usize, message: String| Error::Parse {
            path: path_label.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim_end() == HEADER => {}
            Some((_, first)) => {
                return Err(parse_error(
                    1,
                    format!("expected header `{HEADER}`, found `{}`", first.trim_end()),
                ))
            }
            None => return Err(parse_error(1, format!("empty file; expected header `{HEADER}`"))),
        }
        let mut points = Vec::new();
        for (index, raw) in lines {
            let line_no = index + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(parse_error(
                    line_no,
                    format!("expected 7 comma-separated fields, found {}", fields.len()),
                ));
            }
            let number = |text: &str, name: &str| -> Result<f64> {
                text.trim().parse::<f64>().map_err(|_| {
                    parse_error(line_no, format!("field {name}: `{text}` is not a number"))
                })
            };
            let flows = FlowConfiguration::new(
                number(fields[1], "n_enter")?,
                number(fields[2], "n_exit")?,
                number(fields[3], "n2")?,
            )
            .map_err(|e| parse_error(line_no, e.to_string()))?;
            let observed =
                FlowDistribution::new(number(fields[4], "x1_s")?, number(fields[5], "x1_b")?)
                    .map_err(|e| parse_error(line_no, e.to_string()))?;
            let weight = number(fields[6], "weight")?;
            let id = fields[0].trim();
            let scenario_id = if id.is_empty() { None } else { Some(id.to_string()) };
            let point = DataPoint::new(flows, observed, weight, scenario_id)
                .map_err(|e| parse_error(line_no, e.to_string()))?;
            points.push(point);
        }
        Ok(Dataset { points })
    }

    /// Read and parse a dataset file.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_csv(&path.display().to_string(), &text)
    }
}

/// Whether a scenario label survives the CSV format unescaped.
fn is_valid_label(label: &str) -> bool {
    !label.contains([',', '\n', '\r']) && label.trim() == label
}

/// Parse back a string this module just formatted (infallible by
/// construction; the fallback keeps release builds total).
fn parse_back(text: &str) -> f64 {
    text.parse().unwrap_or(0.0)
}

/// Format `value` with `digits` significant digits, in plain decimal
/// notation. Every float column this crate writes uses this formatting (with
/// 9 digits), so downstream tools can rely on one numeric shape.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

/// Format a weight: integral weights print as integers, others with 9
/// significant digits.
fn format_weight(weight: f64) -> String {
    if weight.fract() == 0.0 && weight.abs() < 1e15 {
        format!("{}", weight as i64)
    } else {
        format_significant(weight, 9)
    }
}
