//! Error type shared across the simulation library.

use std::fmt;

use crate::social::NodeId;

/// Errors surfaced by graph, mobility, protocol, and engine operations.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// A parameter was outside its documented range.
    InvalidParameter(String),
    /// An operation referenced a node id that is not part of the graph.
    UnknownNode(NodeId),
    /// A timestamped update arrived at or before an earlier sample.
    TimeRegression { what: &'static str, last: f64, now: f64 },
    /// A constrained scenario could not be constructed for the given size.
    Infeasible(String),
    /// Malformed input while reading an external file format.
    Parse { line: usize, msg: String },
    /// Underlying I/O failure.
    Io(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            SimError::UnknownNode(id) => write!(f, "unknown node {id}"),
            SimError::TimeRegression { what, last, now } => {
                write!(f, "{what}: timestamp {now} does not advance past {last}")
            }
            SimError::Infeasible(msg) => write!(f, "infeasible scenario: {msg}"),
            SimError::Parse { line, msg } => write!(f, "line {line}: {msg}"),
            SimError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
