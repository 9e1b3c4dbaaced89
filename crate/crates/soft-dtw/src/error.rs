//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("feature dimensions differ: {x} vs {y}")]
    FeatureDimMismatch { x: usize, y: usize },

    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("smoothing parameter must be finite and nonnegative, got {0}")]
    InvalidGamma(f64),

    #[error("{operation} requires gamma {requirement}, got {got}")]
    GammaContract {
        operation: &'static str,
        requirement: &'static str,
        got: f64,
    },

    #[error("alignment enumeration for a {n}x{m} pair has {count} matrices, above the limit of {limit}")]
    EnumerationTooLarge {
        n: usize,
        m: usize,
        count: u128,
        limit: u128,
    },

    #[error("{0} requires all series to share one length")]
    UnequalLengths(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("split {index} would be empty (requested fraction {fraction} of {total} items)")]
    EmptySplit {
        index: usize,
        fraction: f64,
        total: usize,
    },

    #[error("class {label} has no training series")]
    EmptyClass { label: i64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model file is not in the expected format: {0}")]
    ModelFormat(String),

    #[error("input fraction {fraction} leaves no room for both segments of a length-{length} series")]
    DegenerateSplit { fraction: f64, length: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
