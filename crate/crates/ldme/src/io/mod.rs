//! Datasets, graph and instance files, run configuration, synthetic
//! generators and JSON reports.

mod config;
mod dataset;
pub mod generate;
mod report;

use thiserror::Error;

pub use config::RunConfig;
pub use dataset::{Dataset, MAGIC};
pub use config::SEED_ENV;
pub use report::{validate_report, Report, Timer, REPORT_SCHEMA};

#[derive(Debug, Error, PartialEq)]
pub enum IoError {
    #[error("bad magic bytes at offset {offset}")]
    BadMagic { offset: usize },
    #[error("file truncated at byte offset {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("non-finite value at byte offset {offset} (entry {index})")]
    NonFiniteAt { offset: usize, index: usize },
    #[error("non-finite value at entry {index}")]
    NonFinite { index: usize },
    #[error("inlier index {index} at byte offset {offset} out of range for {n} rows")]
    InlierAt { offset: usize, index: usize, n: usize },
    #[error("inlier index {index} out of range for {n} rows")]
    InlierOutOfRange { index: usize, n: usize },
    #[error("unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}: {1}")]
    Fs(String, String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}
