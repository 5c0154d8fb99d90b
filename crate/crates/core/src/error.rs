use std::fmt;

use thiserror::Error;

/// A single broken invariant found while validating raw game data.
///
/// Indices are zero-based positions in file order.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPsdCost {
        producer: usize,
        min_eigenvalue: f64,
    },
    AsymmetricCost {
        producer: usize,
    },
    NegativeLinearCost {
        producer: usize,
        market: usize,
    },
    NonPositiveSlope {
        market: usize,
    },
    NonPositiveIntercept {
        market: usize,
    },
    NegativeCapacity {
        link: usize,
    },
    SelfLoop {
        link: usize,
    },
    UnknownMarket {
        link: usize,
        market: usize,
    },
    NonFinite {
        what: String,
    },
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPsdCost {
                producer,
                min_eigenvalue,
            } => write!(
                f,
                "producer {producer}: cost matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})"
            ),
            Violation::AsymmetricCost { producer } => {
                write!(f, "producer {producer}: cost matrix is not symmetric")
            }
            Violation::NegativeLinearCost { producer, market } => write!(
                f,
                "producer {producer}: negative linear cost coefficient at market {market}"
            ),
            Violation::NonPositiveSlope { market } => {
                write!(f, "market {market}: demand slope beta must be > 0")
            }
            Violation::NonPositiveIntercept { market } => {
                write!(f, "market {market}: demand intercept alpha must be > 0")
            }
            Violation::NegativeCapacity { link } => {
                write!(f, "link {link}: capacity must be >= 0")
            }
            Violation::SelfLoop { link } => write!(f, "link {link}: tail equals head"),
            Violation::UnknownMarket { link, market } => {
                write!(f, "link {link}: endpoint {market} is not a market")
            }
            Violation::NonFinite { what } => write!(f, "{what}: value is not finite"),
            Violation::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid game ({} violation(s)): {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("producer {producer} has no access to market {market}")]
    NoAccess { producer: usize, market: usize },
    #[error("producer {producer} sells on market {market} without access")]
    SupportViolation { producer: usize, market: usize },
    #[error("negative or non-finite production at ({producer}, {market})")]
    NegativeProduction { producer: usize, market: usize },
    #[error("flow {value} on link {link} outside [0, {capacity}]")]
    FlowOutOfBounds {
        link: usize,
        value: f64,
        capacity: f64,
    },
    #[error("welfare kind does not admit an exact potential")]
    UnsupportedWelfare,
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (projected-gradient norm {pg_norm:e})")]
    NonConvergence { iterations: usize, pg_norm: f64 },
    #[error("grid has {dimension} boxed dimensions / {points} points; oracle limit exceeded")]
    TooLarge { dimension: usize, points: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    /// Negative consumption at a best response although every market has the
    /// same demand intercept, which rules it out analytically.
    #[error("market {market} has consumption {min_z:e} < 0 although all intercepts are equal")]
    NegativeConsumption { min_z: f64, market: usize },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("{} malformed row(s): {}", .0.len(), join_rows(.0))]
    MalformedRows(Vec<MalformedRow>),
    #[error("zone {0}: not enough demand bids to fit a curve")]
    InsufficientData(String),
    #[error("zone {0}: fitted demand curve is not decreasing")]
    NonDecreasingCurve(String),
    #[error("unit {0}: no awarded quantity")]
    NoAwardedQuantity(String),
    #[error("unit {0}: awarded price does not exceed the linear cost, θ would be <= 0")]
    NonPositiveTheta(String),
    #[error("transit limit references unknown zone {0}")]
    UnknownZone(String),
    #[error("no bid records")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A row rejected by a CSV parser. Lines are one-based and count the header.
#[derive(Debug, Clone, PartialEq)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

fn join_rows(rows: &[MalformedRow]) -> String {
    rows.iter()
        .map(|r| format!("line {}: {}", r.line, r.reason))
        .collect::<Vec<_>>()
        .join("; ")
}
