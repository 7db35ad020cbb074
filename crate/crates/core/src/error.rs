use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate node id {id}")]
    DuplicateId { line: u64, id: usize },

    #[error("line {line}: non-finite coordinate for node {id}")]
    NonFinite { line: u64, id: usize },

    #[error("topology is empty")]
    EmptyTopology,

    #[error("node ids must be 0..{count} without gaps; id {missing} is missing")]
    IdGap { count: usize, missing: usize },

    #[error("node {id} out of range for topology of {count} nodes")]
    NodeOutOfRange { id: usize, count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid combination: {0}")]
    InvalidCombination(String),

    #[error("node {0} is already in the prior set")]
    NodeInPrior(usize),

    #[error("malformed schedule: {0}")]
    MalformedSchedule(String),

    #[error("{count} nodes exceeds the exhaustive limit of {limit}; use sampling or random restarts")]
    TooManyNodes { count: usize, limit: usize },

    #[error("width violation: {0}")]
    Width(String),

    #[error("field has {field} readings but topology has {topology} nodes")]
    SizeMismatch { field: usize, topology: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
