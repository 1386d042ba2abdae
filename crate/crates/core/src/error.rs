use std::fmt;

use thiserror::Error;

/// Errors produced by the localization engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("pixel row {row} is at or above the horizon row {horizon}")]
    HorizonViolation { row: f64, horizon: f64 },

    #[error("cannot split {n} items into {branches} clusters")]
    DegenerateSplit { n: usize, branches: usize },

    #[error("gaussian mixture is empty")]
    EmptyMixture,

    #[error("index is empty")]
    EmptyIndex,

    #[error("ground-truth tile {0} is not present in the index")]
    MissingGroundTruth(usize),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl fmt::Display) -> Self {
        Error::Parse {
            line,
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
