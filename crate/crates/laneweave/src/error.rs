//! Error type shared across the crate.
//!
//! Two broad families matter to callers:
//!
//! * **Input parsing** — [`Error::Parse`] and [`Error::MissingHeader`] carry a
//!   path and 1-based line number so a malformed file can be fixed without
//!   guesswork.
//! * **Domain violations** — everything else: values that break a model
//!   invariant (off-simplex shares, non-positive coefficients) or inputs that
//!   leave an operation undefined (empty datasets, grids with no points).
//!
//! The distinction is load-bearing for the command-line front end, which maps
//! parse failures and domain failures to different exit codes.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures the library can report.
#[derive(Debug, Error)]
pub enum Error {
    /// Raw flow rates cannot be normalized because the entering, exiting, and
    /// inner-lane through flows are all zero.
    #[error("cannot normalize flows: entering, exiting, and inner-lane flows are all zero")]
    ZeroNeighborFlow,

    /// A share vector does not lie on the unit simplex and the deviation is
    /// too large to be float noise from a file round-trip.
    #[error("{context}: components sum to {sum:.12} but must sum to 1 (deviation beyond 1e-9)")]
    OffSimplex {
        /// What was being constructed (for example `"flow configuration"`).
        context: &'static str,
        /// The offending component sum.
        sum: f64,
    },

    /// A scalar field is outside its documented range (negative flow,
    /// non-positive coefficient, NaN weight, and so on).
    #[error("{context}: {name} = {value} is out of range ({requirement})")]
    OutOfRange {
        /// What was being constructed or validated.
        context: &'static str,
        /// Field name as it appears in the public API.
        name: &'static str,
        /// The offending value.
        value: f64,
        /// Human-readable statement of the range requirement.
        requirement: &'static str,
    },

    /// An operation that needs at least one observation received none, or the
    /// observations carry zero total weight.
    #[error("dataset is empty or carries zero total weight")]
    EmptyDataset,

    /// A scenario grid specification admits no points (for example after a
    /// range filter removed everything).
    #[error("scenario grid admits no points")]
    EmptyGrid,

    /// Paired prediction/observation slices differ in length.
    #[error("length mismatch: {left} predictions vs {right} observations/weights")]
    LengthMismatch {
        /// Length of the prediction slice.
        left: usize,
        /// Length of the other slice.
        right: usize,
    },

    /// Every observation has a zero steadfast share, so a relative error
    /// metric is undefined (points with zero observed share are excluded
    /// individually; this error fires only when nothing remains).
    #[error("all observed steadfast shares are zero; relative error is undefined")]
    ZeroObserved,

    /// A vehicle log yielded no usable through-vehicle decisions in any
    /// scenario's measurement window.
    #[error("no through-vehicle decisions found in any scenario window")]
    NoThroughVehicles,

    /// A file is syntactically malformed at the given 1-based line.
    #[error("{path}:{line}: {message}")]
    Parse {
        /// Path of the offending file, as given by the caller.
        path: String,
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        message: String,
    },

    /// A vehicle log does not start with the required column header line.
    #[error("{path}:{line}: missing column header `timestep,vehicle_id,vclass,decision`")]
    MissingHeader {
        /// Path of the offending file.
        path: String,
        /// 1-based line number where the header was expected.
        line: usize,
    },

    /// An underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether this error reports a malformed input file (as opposed to a
    /// domain violation in well-formed input). Front ends use this to pick
    /// exit codes.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::MissingHeader { .. })
    }
}
