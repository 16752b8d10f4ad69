use thiserror::Error;

use crate::config::Violation;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", list(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("pilot codebook needs at least {np} codewords to sub-sample {np} DFT rows, got {n_codewords}")]
    CodebookTooSmall { np: usize, n_codewords: usize },

    #[error("pattern weight {weight} exceeds the {rows} available rows")]
    PatternWeight { weight: usize, rows: usize },

    #[error("pattern column {column} has {found} active rows, expected {expected}")]
    PatternSupport {
        column: usize,
        found: usize,
        expected: usize,
    },

    #[error("length mismatch for {what}: expected {expected}, got {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("regularized Gram matrix is not positive definite ({size}x{size}, ridge {ridge:e})")]
    Singular { size: usize, ridge: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reliability table corrupted: {0}")]
    ReliabilityTable(String),

    #[error("malformed codebook dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
