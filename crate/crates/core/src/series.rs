//! Left- and right-ordered iterated-integral series.
//!
//! For a square generator `X(x)` on `[x_lo, x_hi]` the left-ordered series is
//!
//! ```text
//! E[X](x) = I + ∫X + ∫X(t)∫X(s) + ...
//! ```
//!
//! and the right-ordered series `F[X]` nests the integrals on the other side.
//! Each term is the cumulative integral of the generator times the previous
//! term, so a table of term values on the grid is all that is carried from one
//! order to the next. `E[X]` solves `Y' = X·Y`, `F[X]` solves `Y' = Y·X`, both
//! with `Y(x_lo) = I`.

use crate::coeff::{sampled_bound, CoeffMatrix};
use crate::dense::Matrix;
use crate::error::{Error, Result};

/// Uniform grid with an even number of intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_lo: f64,
    x_hi: f64,
    n_intervals: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n_intervals: usize) -> Result<Grid> {
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi {
            return Err(Error::InvalidGrid(format!(
                "need finite x_lo < x_hi, got [{x_lo}, {x_hi}]"
            )));
        }
        if n_intervals == 0 || !n_intervals.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_intervals must be positive and even, got {n_intervals}"
            )));
        }
        Ok(Grid {
            x_lo,
            x_hi,
            n_intervals,
        })
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    /// Number of nodes, `n_intervals + 1`.
    pub fn len(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_intervals as f64
    }

    pub fn span(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn node(&self, i: usize) -> f64 {
        assert!(i <= self.n_intervals);
        if i == self.n_intervals {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest_node(&self, x: f64) -> usize {
        let i = ((x - self.x_lo) / self.h()).round();
        i.clamp(0.0, self.n_intervals as f64) as usize
    }

    /// Same interval with `n_intervals` doubled.
    pub fn refined(&self) -> Grid {
        Grid {
            n_intervals: self.n_intervals * 2,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    /// Maximum number of terms summed, counting the identity term.
    pub max_terms: usize,
    /// A term whose sup over the grid falls below this ends the sum.
    pub term_tol: f64,
    pub quadrature: Quadrature,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            max_terms: 40,
            term_tol: 1e-13,
            quadrature: Quadrature::Simpson,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::InvalidConfig("max_terms must be positive".into()));
        }
        if !(self.term_tol > 0.0 && self.term_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "term_tol must be positive, got {}",
                self.term_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ordering {
    /// `E[X]`: new factors enter on the left, `Y' = X·Y`.
    Left,
    /// `F[X]`: new factors enter on the right, `Y' = Y·X`.
    Right,
}

impl Ordering {
    pub fn label(self) -> &'static str {
        match self {
            Ordering::Left => "E",
            Ordering::Right => "F",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorTable {
    pub kind: Ordering,
    /// One value per grid node.
    pub values: Vec<Matrix>,
    /// Terms summed, the identity included.
    pub terms_used: usize,
    /// Sup-norm of the first term left out of the sum.
    pub last_term_norm: f64,
    /// Analytic bound on everything left out.
    pub tail_bound: f64,
    /// Generator bound the tail estimate was computed from.
    pub bound_m: f64,
}

impl PropagatorTable {
    pub fn dim(&self) -> usize {
        self.values[0].rows()
    }
}

/// Minimum determinant a propagator value may have before the table is
/// declared numerically broken.
pub const DET_FLOOR: f64 = 1e-300;

/// Cumulative integral from the first node to every node.
///
/// Even nodes use composite Simpson. Odd node `i` adds to the Simpson value
/// at `i-1` the increment over `[x[i-1], x[i]]` of the cubic through four
/// neighbouring samples, `h/24 (-f[i-2] + 13 f[i-1] + 13 f[i] - f[i+1])`,
/// or the one-sided `h/24 (9 f[0] + 19 f[1] - 5 f[2] + f[3])` at `i = 1`.
/// On a two-interval grid there are not four samples and node 1 falls back
/// to the three-point `h/12 (5 f[0] + 8 f[1] - f[2])`.
pub fn cumulative_integral(samples: &[Matrix], grid: &Grid) -> Result<Vec<Matrix>> {
    if samples.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "{} samples for a grid of {} nodes",
            samples.len(),
            grid.len()
        )));
    }
    let shape = samples[0].shape();
    if let Some(bad) = samples.iter().find(|m| m.shape() != shape) {
        return Err(Error::DimensionMismatch {
            op: "cumulative_integral",
            left: shape,
            right: bad.shape(),
        });
    }
    let len = shape.0 * shape.1;
    let h = grid.h();
    let f = |i: usize| samples[i].as_slice();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    out.push(vec![0.0; len]);
    for i in 1..samples.len() {
        let v: Vec<f64> = if i % 2 == 0 {
            let (a, b, c) = (f(i - 2), f(i - 1), f(i));
            (0..len)
                .map(|k| out[i - 2][k] + h / 3.0 * (a[k] + 4.0 * b[k] + c[k]))
                .collect()
        } else if i >= 3 {
            let (a, b, c, d) = (f(i - 2), f(i - 1), f(i), f(i + 1));
            (0..len)
                .map(|k| out[i - 1][k] + h / 24.0 * (13.0 * (b[k] + c[k]) - a[k] - d[k]))
                .collect()
        } else if samples.len() >= 4 {
            let (a, b, c, d) = (f(0), f(1), f(2), f(3));
            (0..len)
                .map(|k| h / 24.0 * (9.0 * a[k] + 19.0 * b[k] - 5.0 * c[k] + d[k]))
                .collect()
        } else {
            let (a, b, c) = (f(0), f(1), f(2));
            (0..len).map(|k| h / 12.0 * (5.0 * a[k] + 8.0 * b[k] - c[k])).collect()
        };
        out.push(v);
    }
    out.into_iter()
        .map(|data| Matrix::new(shape.0, shape.1, data))
        .collect()
}

/// Samples a coefficient matrix at every grid node.
pub fn sample(coeff: &CoeffMatrix, grid: &Grid) -> Result<Vec<Matrix>> {
    grid.nodes().map(|x| coeff.eval(x)).collect()
}

pub fn compute_e(x: &CoeffMatrix, grid: &Grid, cfg: &SeriesConfig) -> Result<PropagatorTable> {
    propagate(Ordering::Left, &sample(x, grid)?, grid, cfg)
}

pub fn compute_f(x: &CoeffMatrix, grid: &Grid, cfg: &SeriesConfig) -> Result<PropagatorTable> {
    propagate(Ordering::Right, &sample(x, grid)?, grid, cfg)
}

/// Sums the series for a generator given only by its values at the grid
/// nodes.
pub fn propagate(kind: Ordering, generator: &[Matrix], grid: &Grid, cfg: &SeriesConfig) -> Result<PropagatorTable> {
    cfg.validate()?;
    if generator.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "{} generator samples for a grid of {} nodes",
            generator.len(),
            grid.len()
        )));
    }
    let n = generator[0].rows();
    if !generator[0].is_square() {
        return Err(Error::NotSquare {
            op: "propagate",
            shape: generator[0].shape(),
        });
    }

    let mut sum: Vec<Matrix> = vec![Matrix::identity(n); grid.len()];
    let mut term = sum.clone();
    let mut terms_used = 1;
    let mut last_term_norm = f64::INFINITY;
    while terms_used < cfg.max_terms {
        let integrand = generator
            .iter()
            .zip(&term)
            .map(|(g, t)| match kind {
                Ordering::Left => g.mul(t),
                Ordering::Right => t.mul(g),
            })
            .collect::<Result<Vec<_>>>()?;
        term = cumulative_integral(&integrand, grid)?;
        last_term_norm = term.iter().map(Matrix::norm_max).fold(0.0, f64::max);
        if last_term_norm < cfg.term_tol {
            break;
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s = s.add(t)?;
        }
        terms_used += 1;
    }
    if last_term_norm >= cfg.term_tol {
        return Err(Error::Truncation {
            terms: terms_used,
            last_term_norm,
        });
    }

    for (i, v) in sum.iter().enumerate() {
        let det = v.det()?;
        if det.is_nan() || det <= DET_FLOOR {
            return Err(Error::Inconsistent(format!(
                "det {}[X] = {det:e} at node {i}; the exact value is exp(∫tr X) > 0",
                kind.label()
            )));
        }
    }

    let bound_m = sampled_bound(generator).m;
    Ok(PropagatorTable {
        kind,
        values: sum,
        terms_used,
        last_term_norm,
        tail_bound: tail_bound(bound_m, n, grid.span(), terms_used - 1),
        bound_m,
    })
}

/// Bound on the series terms beyond order `k_summed`:
/// `(1/n) Σ_{k > K} (n·M·x)^k / k!`.
pub fn tail_bound(m: f64, n: usize, x: f64, k_summed: usize) -> f64 {
    assert!(n >= 1);
    let z = n as f64 * m * x.abs();
    if z == 0.0 {
        return 0.0;
    }
    let first = k_summed + 1;
    let tail = if (first as f64) > z {
        // Terms decrease from here on; add them directly so tiny tails are
        // not lost to cancellation against e^z.
        let mut t = 1.0f64;
        for j in 1..=first {
            t *= z / j as f64;
        }
        let mut acc = 0.0;
        let mut k = first;
        while t > 0.0 && t > acc * f64::EPSILON * 0.25 {
            acc += t;
            k += 1;
            t *= z / k as f64;
        }
        acc
    } else {
        let mut partial = 0.0;
        let mut t = 1.0f64;
        for k in 0..=k_summed {
            if k > 0 {
                t *= z / k as f64;
            }
            partial += t;
        }
        z.exp() - partial
    };
    (tail / n as f64).max(0.0)
}

/// Largest centered-difference residual of the defining ODE over the
/// interior nodes.
pub fn propagator_residual(table: &PropagatorTable, generator: &[Matrix], grid: &Grid) -> Result<f64> {
    let h = grid.h();
    let v = &table.values;
    let mut worst = 0.0f64;
    for i in 1..v.len() - 1 {
        let deriv = v[i + 1].sub(&v[i - 1])?.scale(1.0 / (2.0 * h))?;
        let rhs = match table.kind {
            Ordering::Left => generator[i].mul(&v[i])?,
            Ordering::Right => v[i].mul(&generator[i])?,
        };
        worst = worst.max(deriv.max_abs_diff(&rhs)?);
    }
    Ok(worst)
}
