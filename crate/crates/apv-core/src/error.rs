//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying stream could not be read.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV stream could not be decoded.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A mandatory column is absent from the CSV header.
    #[error("missing mandatory column in header: '{0}'")]
    MissingColumn(String),

    /// A CPI lookup fell outside the table's coverage.
    #[error("cpi table does not cover month {0}")]
    CpiCoverage(String),

    /// An argument violated a function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that needs at least one observation got none.
    #[error("empty sample")]
    EmptySample,

    /// Sample too small for the requested statistic.
    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    /// Zero pooled standard error with unequal medians: the z statistic is undefined.
    #[error("degenerate inference: zero pooled standard error with unequal medians")]
    DegenerateInference,

    /// All-pairs comparison needs at least two eligible groups.
    #[error("need >= 2 groups with enough observations, got {0}")]
    NotEnoughGroups(usize),

    /// No sale carried an execution year, so no life-cycle curve exists.
    #[error("empty curve: no sale has an execution year")]
    EmptyCurve,

    /// Design matrix is rank deficient; removing the listed columns restores full rank.
    #[error("rank-deficient design; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    /// Fewer rows than columns.
    #[error("under-determined system: {rows} rows < {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    /// Two return series share too few year pairs to correlate.
    #[error("insufficient overlap: need at least {needed} shared return observations, got {got}")]
    InsufficientOverlap { needed: usize, got: usize },

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Not enough data for the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
