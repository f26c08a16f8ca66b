//! Error metrics and sensitivity reports for calibrated models.
//!
//! Two questions recur once a coefficient set exists:
//!
//! * **How well does it predict?** — [`validate`] replays a dataset through
//!   the equilibrium solver and scores the predictions with the *mean
//!   percent error* ([`mper`]): the average of `|observed - predicted| /
//!   observed`, in percent, over the observed steadfast share. Observations
//!   of exactly zero have no defined percent error; they are excluded and
//!   tallied rather than silently dropped.
//! * **How far did it move?** — [`fluctuating_rate`] compares two
//!   coefficient sets (typically a baseline fit and a re-fit under changed
//!   conditions) by the percent change of each coefficient, flagging moves
//!   beyond a significance threshold.
//!
//! Reports carry both machine-readable fields (serialized with percentages
//! rounded to four significant digits) and aligned plain-text renderings for
//! terminals.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::calibration::predict;
use crate::dataset::{format_significant, DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::flow::{CostCoefficients, FlowDistribution};

/// Coefficient moves larger than this percentage are flagged as significant
/// by default.
pub const DEFAULT_FR_THRESHOLD: f64 = 25.0;

/// Compensated (Kahan) accumulator, so long reductions do not lose small
/// per-point errors to cancellation.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let adjusted = value - self.compensation;
        let next = self.sum + adjusted;
        self.compensation = (next - self.sum) - adjusted;
        self.sum = next;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Round to four significant digits for serialization; full precision stays
/// available through the API.
fn round_percent(value: f64) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    let decimals = 3 - value.abs().log10().floor() as i32;
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

fn serialize_percent<S: Serializer>(value: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.serialize_f64(round_percent(*value))
}

fn serialize_percent_map<S: Serializer>(
    map: &BTreeMap<String, f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_map(map.iter().map(|(k, v)| (k, round_percent(*v))))
}

/// A mean-percent-error summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanPercentError {
    /// The error, in percent of the observed value.
    #[serde(serialize_with = "serialize_percent")]
    pub percent: f64,
    /// Observations that entered the mean.
    pub points_used: usize,
    /// Observations excluded because the observed value was zero (percent
    /// error undefined) or carried zero weight.
    pub excluded: usize,
}

/// Mean percent error of `predicted` against `observed`, optionally
/// weighted.
///
/// Each point contributes `|observed - predicted| / observed`; the mean is
/// returned in percent. Points with a non-positive observed value or zero
/// weight are excluded and counted in
/// [`excluded`](MeanPercentError::excluded).
///
/// # Errors
///
/// * [`Error::LengthMismatch`] when the slices disagree in length.
/// * [`Error::OutOfRange`] on a negative or non-finite weight.
/// * [`Error::ZeroObserved`] when no point survives exclusion.
pub fn mper(
    predicted: &[f64],
    observed: &[f64],
    weights: Option<&[f64]>,
) -> Result<MeanPercentError> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: observed.len() });
    }
    if let Some(weights) = weights {
        if weights.len() != observed.len() {
            return Err(Error::LengthMismatch { left: weights.len(), right: observed.len() });
        }
        for &weight in weights {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::OutOfRange {
                    context: "mean percent error",
                    name: "weight",
                    value: weight,
                    requirement: "must be finite and >= 0",
                });
            }
        }
    }

    let mut numerator = KahanSum::default();
    let mut denominator = KahanSum::default();
    let mut points_used = 0;
    let mut excluded = 0;
    for (index, (&prediction, &observation)) in predicted.iter().zip(observed).enumerate() {
        let weight = weights.map_or(1.0, |w| w[index]);
        if observation <= 0.0 || weight == 0.0 {
            excluded += 1;
            continue;
        }
        numerator.add(weight * ((observation - prediction) / observation).abs());
        denominator.add(weight);
        points_used += 1;
    }
    if points_used == 0 || denominator.value() <= 0.0 {
        return Err(Error::ZeroObserved);
    }
    Ok(MeanPercentError {
        percent: 100.0 * numerator.value() / denominator.value(),
        points_used,
        excluded,
    })
}

/// How [`validate`] buckets points for per-group error breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    /// Group by the scenario label (unlabeled points share one bucket).
    ScenarioId,
    /// Group by the entering share.
    NEnter,
    /// Group by the exiting share.
    NExit,
    /// Group by the inner-lane share.
    N2,
}

impl GroupBy {
    /// Bucket label of one point.
    fn label(&self, point: &DataPoint) -> String {
        match self {
            GroupBy::ScenarioId => {
                point.scenario_id.clone().unwrap_or_else(|| "(unlabeled)".to_string())
            }
            GroupBy::NEnter => share_label(point.flows.n_enter()),
            GroupBy::NExit => share_label(point.flows.n_exit()),
            GroupBy::N2 => share_label(point.flows.n2()),
        }
    }
}

/// Nine significant digits with trailing zeros trimmed: distinct shares get
/// distinct labels, and lattice values read naturally (`0.25`, not
/// `0.250000000`).
fn share_label(value: f64) -> String {
    let text = format_significant(value, 9);
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

/// One scored observation inside a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPoint {
    /// The observation.
    pub point: DataPoint,
    /// The model's predicted split at the observation's flows.
    pub predicted: FlowDistribution,
    /// `|observed - predicted|` on the steadfast share.
    pub abs_error: f64,
    /// Percent error on the steadfast share; `None` when the observed share
    /// is zero.
    pub rel_error: Option<f64>,
}

/// Outcome of scoring a dataset against a coefficient set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Per-point detail, in dataset order (not serialized; see
    /// [`ValidationReport::write_points_csv`]).
    #[serde(skip)]
    pub points: Vec<ValidationPoint>,
    /// Mean percent error over all points with a nonzero observed share.
    /// Every observation counts once, regardless of its weight.
    #[serde(serialize_with = "serialize_percent")]
    pub mper: f64,
    /// Mean percent error per bucket, when grouping was requested.
    #[serde(serialize_with = "serialize_percent_map")]
    pub grouped_mper: BTreeMap<String, f64>,
    /// Total observations scored.
    pub n_points: usize,
    /// Observations that entered the error mean.
    pub points_used: usize,
    /// Observations excluded for a zero observed share.
    pub excluded: usize,
}

/// Score `data` against the equilibrium predictions of `coefficients`.
///
/// Predictions run per point (in parallel when the `parallel` feature is
/// active); the error reduction is sequential and compensated, so results do
/// not depend on scheduling. The headline error treats every observation
/// equally — weights describe how many vehicles produced an observation, not
/// how much an observation should count in this metric.
///
/// # Errors
///
/// * [`Error::EmptyDataset`] when `data` has no points.
/// * [`Error::ZeroObserved`] when every observed steadfast share is zero.
pub fn validate(
    coefficients: &CostCoefficients,
    data: &Dataset,
    group_by: Option<GroupBy>,
) -> Result<ValidationReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictions = exec::map_slice(data.points(), |point| predict(coefficients, &point.flows));

    let mut points = Vec::with_capacity(data.len());
    let mut total = KahanSum::default();
    let mut points_used = 0;
    let mut excluded = 0;
    let mut groups: BTreeMap<String, (KahanSum, usize)> = BTreeMap::new();
    for (point, predicted) in data.points().iter().zip(predictions) {
        let observation = point.observed.x1_s();
        let abs_error = (observation - predicted.x1_s()).abs();
        let rel_error = if observation > 0.0 {
            Some(100.0 * abs_error / observation)
        } else {
            None
        };
        match rel_error {
            Some(percent) => {
                total.add(percent);
                points_used += 1;
                if let Some(grouping) = group_by {
                    let (sum, count) = groups.entry(grouping.label(point)).or_default();
                    sum.add(percent);
                    *count += 1;
                }
            }
            None => excluded += 1,
        }
        points.push(ValidationPoint { point: point.clone(), predicted, abs_error, rel_error });
    }
    if points_used == 0 {
        return Err(Error::ZeroObserved);
    }
    Ok(ValidationReport {
        mper: total.value() / points_used as f64,
        grouped_mper: groups
            .into_iter()
            .map(|(label, (sum, count))| (label, sum.value() / count as f64))
            .collect(),
        n_points: data.len(),
        points_used,
        excluded,
        points,
    })
}

impl ValidationReport {
    /// Aligned plain-text summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "points: {} ({} scored, {} excluded for zero observed share)\n",
            self.n_points, self.points_used, self.excluded
        ));
        out.push_str(&format!("mean percent error (steadfast share): {:.2}%\n", self.mper));
        if !self.grouped_mper.is_empty() {
            out.push_str("per group:\n");
            let width =
                self.grouped_mper.keys().map(String::len).max().unwrap_or(0).max(5);
            for (label, value) in &self.grouped_mper {
                out.push_str(&format!("  {label:<width$}  {value:9.2}%\n"));
            }
        }
        out
    }

    /// Write the per-point detail as CSV: the observation columns plus the
    /// prediction and both error measures (`rel_error_percent` is empty for
    /// excluded points).
    pub fn write_points_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(96 * (self.points.len() + 1));
        out.push_str(
            "scenario_id,n_enter,n_exit,n2,x1_s_observed,x1_s_predicted,abs_error,rel_error_percent,weight\n",
        );
        for scored in &self.points {
            let p = &scored.point;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.scenario_id.as_deref().unwrap_or(""),
                format_significant(p.flows.n_enter(), 9),
                format_significant(p.flows.n_exit(), 9),
                format_significant(p.flows.n2(), 9),
                format_significant(p.observed.x1_s(), 9),
                format_significant(scored.predicted.x1_s(), 9),
                format_significant(scored.abs_error, 9),
                scored.rel_error.map(|e| format_significant(e, 9)).unwrap_or_default(),
                format_significant(p.weight, 9),
            ));
        }
        let mut file = File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Per-coefficient percent change between two coefficient sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationReport {
    /// The reference coefficients.
    pub baseline: CostCoefficients,
    /// The coefficients under comparison.
    pub variant: CostCoefficients,
    /// Percent change per coefficient: `(variant - baseline) / baseline`,
    /// in percent. Covers the six stream weights, plus the four unit costs
    /// when any of them differ between the two sets.
    #[serde(serialize_with = "serialize_percent_map")]
    pub fr: BTreeMap<String, f64>,
    /// Coefficients whose absolute percent change exceeds the threshold.
    pub significant: BTreeSet<String>,
    /// Significance threshold, in percent.
    pub threshold: f64,
}

/// Compare `variant` to `baseline` coefficient by coefficient.
///
/// The *fluctuating rate* of a coefficient is its percent change relative to
/// the baseline; changes with magnitude above `threshold` (strictly) are
/// flagged. The six stream weights are always reported; the four unit costs
/// only when the two sets disagree on at least one of them, since fits with
/// fixed unit costs would otherwise report four structural zeros.
pub fn fluctuating_rate(
    baseline: &CostCoefficients,
    variant: &CostCoefficients,
    threshold: f64,
) -> FluctuationReport {
    let unit_costs = ["c1_t", "c2_t", "c1_m", "c2_m"];
    let base_fields = baseline.named_fields();
    let variant_fields = variant.named_fields();
    let unit_costs_differ = base_fields
        .iter()
        .zip(&variant_fields)
        .any(|((name, base), (_, var))| unit_costs.contains(name) && base != var);

    let mut fr = BTreeMap::new();
    let mut significant = BTreeSet::new();
    for ((name, base), (_, var)) in base_fields.iter().zip(&variant_fields) {
        if unit_costs.contains(name) && !unit_costs_differ {
            continue;
        }
        let rate = 100.0 * (var - base) / base;
        if rate.abs() > threshold {
            significant.insert(name.to_string());
        }
        fr.insert(name.to_string(), rate);
    }
    FluctuationReport {
        baseline: *baseline,
        variant: *variant,
        fr,
        significant,
        threshold,
    }
}

impl FluctuationReport {
    /// Aligned plain-text table; significant rows are starred.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "coefficient fluctuation (threshold {:.0}%)\n",
            self.threshold
        ));
        out.push_str("  coefficient   baseline   variant        fr%\n");
        // named_fields order keeps unit costs ahead of the stream weights.
        for (name, base) in self.baseline.named_fields() {
            let Some(rate) = self.fr.get(name) else { continue };
            let variant = self
                .variant
                .named_fields()
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .expect("both sets carry the same field names");
            let star = if self.significant.contains(name) { "  *" } else { "" };
            out.push_str(&format!(
                "  {name:<11} {base:>10.3} {variant:>9.3} {rate:>+9.2}{star}\n"
            ));
        }
        out
    }
}
