use thiserror::Error;

use crate::coeff::BoundReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op}: expected a square matrix, got {shape:?}")]
    NotSquare { op: &'static str, shape: (usize, usize) },

    #[error("matrix has {len} entries, expected {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },

    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("non-finite matrix entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("matrix is singular to working precision (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },

    #[error("domain error at x = {x}: `{expr}` is not finite")]
    Domain { x: f64, expr: String },

    #[error("coefficient ({row}, {col}): domain error at x = {x}: `{expr}` is not finite")]
    CoeffDomain {
        row: usize,
        col: usize,
        x: f64,
        expr: String,
    },

    #[error("x = {x} lies outside the coefficient domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("coefficient is not bounded on its domain: non-finite at x = {}", .report.offending_point.unwrap_or(f64::NAN))]
    Unbounded { report: BoundReport },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series did not converge: {terms} terms summed, last term norm {last_term_norm:e}")]
    Truncation { terms: usize, last_term_norm: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("particular solution blows up at node {node} (x = {x})")]
    ParticularBlowUp { node: usize, x: f64 },

    #[error("reference integrator diverged; last finite x = {last_finite_x}")]
    Divergence { last_finite_x: f64 },

    #[error("solutions live on different grids")]
    GridMismatch,

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for errors caused by malformed user input rather than by a
    /// computation that failed.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::Problem(_)
                | Error::InvalidGrid(_)
                | Error::InvalidConfig(_)
                | Error::BadLength { .. }
                | Error::EmptyMatrix { .. }
                | Error::DimensionMismatch { .. }
                | Error::NotSquare { .. }
                | Error::OutsideDomain { .. }
                | Error::Io { .. }
        )
    }
}
