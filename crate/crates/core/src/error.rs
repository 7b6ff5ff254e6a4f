//! Error type shared by the allocation library.

use std::error;
use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building inputs or running an
/// allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A type invariant was violated at construction time (for example a
    /// non-positive utility parameter).
    InvalidParameter(String),
    /// An operation was called with an argument outside its domain (for
    /// example a negative rate or a non-positive price).
    DomainViolation(String),
    /// A shadow price was requested for a sector whose bids are all zero.
    DegeneratePrice { sector: usize },
    /// Every sector group is either interference-masked or empty, so the
    /// stage has nobody to allocate to.
    NoEligibleGroup,
    /// The requested grid search would exceed the state budget.
    TooLarge { states: usize, limit: usize },
    /// Coordinate ascent failed to reach the requested gain tolerance.
    AscentStalled { sweeps: usize, last_gain: f64 },
    /// A scenario document could not be parsed.
    Parse(String),
    /// A scenario document parsed but violated a named invariant.
    Validation(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DomainViolation(msg) => write!(f, "domain violation: {msg}"),
            Error::DegeneratePrice { sector } => {
                write!(f, "degenerate price: all bids in sector {sector} are zero")
            }
            Error::NoEligibleGroup => {
                write!(f, "no eligible sector group: every group is masked or empty")
            }
            Error::TooLarge { states, limit } => {
                write!(f, "grid search needs {states} states, limit is {limit}")
            }
            Error::AscentStalled { sweeps, last_gain } => {
                write!(
                    f,
                    "coordinate ascent did not converge after {sweeps} sweeps \
                     (last sweep gained {last_gain:e})"
                )
            }
            Error::Parse(msg) => write!(f, "scenario parse error: {msg}"),
            Error::Validation(msg) => write!(f, "scenario validation error: {msg}"),
        }
    }
}

impl error::Error for Error {}
