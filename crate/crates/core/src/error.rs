use std::io;

use thiserror::Error;

use crate::factor::Breakdown;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("unknown format name `{0}` (expected fp16, bf16, fp32 or fp64)")]
    UnknownName(String),
    #[error("significand width {0} outside 2..=53")]
    SignificandBits(u32),
    #[error("exponent width {0} outside 2..=11")]
    ExponentBits(u32),
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported Matrix Market header: {0}")]
    Header(String),
    #[error("entry ({row}, {col}) outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("diagonal entry {0} is missing or zero")]
    MissingDiagonal(usize),
    #[error("column {col}: {msg}")]
    Structure { col: usize, msg: String },
    #[error("column {0} has zero or non-finite norm")]
    BadColumnNorm(usize),
    #[error("entry {value} overflows {format} when squeezed")]
    SqueezeOverflow { value: f64, format: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("factorization still breaks down after {} attempts (last: {:?})", .history.len(), .history.last())]
    RestartsExhausted { history: Vec<(f64, Breakdown)> },
    #[error("fill pattern does not contain entry ({row}, {col}) of the matrix")]
    PatternMismatch { row: usize, col: usize },
    #[error("shift {0} is negative or not finite")]
    BadShift(f64),
    #[error("input matrix entry {value} is not representable in {format}")]
    NotRepresentable { value: f64, format: String },
    #[error("factor has a zero diagonal in column {0}")]
    ZeroDiagonal(usize),
}

/// Errors surfaced by the experiment pipeline.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("reading {path}: {source}")]
    Matrix {
        path: String,
        #[source]
        source: MatrixError,
    },
    #[error(transparent)]
    Scale(MatrixError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
