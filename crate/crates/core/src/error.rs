use thiserror::Error;

use crate::dynamics::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("edge ({0}, {1}) references a node outside the graph")]
    NodeOutOfRange(usize, usize),

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge between nodes {0} and {1}")]
    DuplicateEdge(usize, usize),

    #[error("node {0} has no incident edge")]
    IsolatedNode(usize),

    #[error("edge index {index} out of range for {count} edges")]
    EdgeOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input gain b = {b} too large for degree {degree}: a^2 + 2 b^2 d < a has no solution unless b < sqrt(1/(8d)) = {limit}")]
    GainTooLarge { b: f64, degree: usize, limit: f64 },

    #[error("invalid candidate set: {0}")]
    InvalidCandidates(String),

    #[error("could not place {count} candidates with separation {separation} after {attempts} attempts")]
    SeparationUnsatisfiable {
        count: usize,
        separation: f64,
        attempts: usize,
    },

    #[error("true model index {index} out of range at node {node} ({count} candidates)")]
    TrueIndexOutOfRange {
        node: usize,
        index: usize,
        count: usize,
    },

    #[error("network fails admissibility: {}", format_violations(.0))]
    Inadmissible(Vec<Violation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("cubic has no positive real root")]
    NoPositiveRoot,
}

fn format_violations(violations: &[Violation]) -> String {
    const SHOWN: usize = 5;
    let mut parts: Vec<String> = violations.iter().take(SHOWN).map(|v| v.to_string()).collect();
    if violations.len() > SHOWN {
        parts.push(format!("... and {} more", violations.len() - SHOWN));
    }
    parts.join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
