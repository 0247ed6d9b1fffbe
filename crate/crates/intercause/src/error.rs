use thiserror::Error;

/// Errors produced by estimation, validation, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("evidence must be fully specified for this operation")]
    EmptyEvidence,

    #[error("exposure cell ({z},{m}) has zero total count")]
    ZeroCellTotal { z: u8, m: u8 },

    #[error("cell counts invalid: {0}")]
    InvalidCounts(String),

    #[error("observed rates reject monotonicity: {0}")]
    Infeasible(String),

    #[error("posterior undefined: evidence cell ({z},{m},{y}) has probability zero")]
    ZeroDenominator { z: u8, m: u8, y: u8 },

    #[error("total mixture density is zero at w = {w}")]
    ZeroDensity { w: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset invalid: {0}")]
    InvalidDataset(String),

    #[error("weighted design matrix is rank deficient for {context}")]
    RankDeficient { context: String },

    #[error("inner optimizer failed to converge: {0}")]
    OptimizerFailure(String),

    #[error("no EM start produced a finite likelihood")]
    AllStartsFailed,

    #[error("ambiguous label matching: components {a} and {b} both match key {key}")]
    AmbiguousMatch { a: usize, b: usize, key: f64 },

    #[error("unmatched mixture component: {0}")]
    UnmatchedComponent(String),

    #[error("bootstrap unstable: {failed} of {total} replicates failed")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
