use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    /// `row` is 1-based over data rows (the header is not counted).
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("label {label} is outside the label space of size {size}")]
    LabelOutOfSpace { label: usize, size: usize },

    #[error("task mismatch: {0}")]
    Task(String),

    #[error("underdetermined fit: {rows} rows for {params} parameters")]
    Underdetermined { rows: usize, params: usize },

    #[error("separation: all outcomes are identical; use ridge > 0")]
    Separation,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code for the CLI: 1 for usage/configuration, 2 for data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}
