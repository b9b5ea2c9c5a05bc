//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// A numeric precondition was violated (bad parameter, degenerate input).
    Domain(String),
    /// A budget cannot be met under the given capacities.
    Infeasible {
        budget: u64,
        capacity: u64,
    },
    /// An integer result does not fit the platform width.
    Overflow(String),
    /// An operation received an empty input it cannot handle.
    EmptyInput(&'static str),
    /// Paired vectors have different lengths.
    LengthMismatch {
        left: usize,
        right: usize,
    },
    /// The brute-force enumeration guard was exceeded.
    EnumerationLimit {
        count: u64,
        limit: u64,
    },
    /// No candidate message satisfies the capacity constraints.
    NoFeasibleCandidate,
    /// Every unused chunk has been consumed.
    PoolExhausted,
    /// Every hypothesis scored minus infinity against the evidence.
    NoConsistentHypothesis,
    /// A configuration file or override could not be parsed.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Domain(msg) => write!(f, "domain error: {msg}"),
            Self::Infeasible { budget, capacity } => {
                write!(f, "budget {budget} exceeds total capacity {capacity}")
            }
            Self::Overflow(msg) => write!(f, "integer overflow: {msg}"),
            Self::EmptyInput(what) => write!(f, "empty input: {what}"),
            Self::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Self::EnumerationLimit { count, limit } => {
                write!(f, "enumeration size {count} exceeds guard {limit}")
            }
            Self::NoFeasibleCandidate => write!(f, "no feasible candidate message"),
            Self::PoolExhausted => write!(f, "candidate pool exhausted"),
            Self::NoConsistentHypothesis => {
                write!(f, "no hypothesis is consistent with the evidence")
            }
            Self::Config(msg) => write!(f, "config error: {msg}"),
            Self::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err)
    }
}
