use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid shape {rows}x{cols}: {reason}")]
    InvalidShape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("{0} requires at least one sample")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "budget of {budget} updates cannot cover one generation costing {per_generation} updates"
    )]
    BudgetTooSmall { budget: u64, per_generation: u64 },

    #[error("member {id} has not been evaluated")]
    Unevaluated { id: u64 },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate index {0}")]
    DuplicateIndex(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("not an IDX {expected} file (magic {found:#010x})")]
    BadMagic { expected: &'static str, found: u32 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("invalid model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            op,
            expected,
            actual,
        }
    }
}
