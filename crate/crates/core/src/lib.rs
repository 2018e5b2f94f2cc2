//! Iterated-integral propagators for linear time-varying systems.
//!
//! The crate computes the left- and right-ordered iterated-integral series
//! `E[X]` and `F[X]` of a matrix function `X(x)` on a uniform grid, and uses
//! them to solve forced linear systems, n-th order scalar linear ODEs,
//! Sylvester-type matrix ODEs, and matrix Riccati equations. A fixed-step
//! RK4 integrator is included as an independent reference.

pub mod cli;
pub mod coeff;
pub mod csv;
pub mod dense;
pub mod error;
pub mod expr;
pub mod oracle;
pub mod problem;
pub mod selftest;
pub mod series;
pub mod solvers;
pub mod verify;

pub use coeff::{BoundReport, CoeffMatrix};
pub use dense::Matrix;
pub use error::{Error, Result};
pub use expr::Expr;
pub use series::{Grid, Ordering, PropagatorTable, SeriesConfig};
