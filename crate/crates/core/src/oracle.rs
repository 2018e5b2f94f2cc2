//! Fixed-step classical RK4 reference integrators.
//!
//! Coefficients are evaluated from their expressions at every stage, never
//! from grid samples, so these results share nothing with the series path
//! except the problem statement.

use crate::coeff::CoeffMatrix;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::series::Grid;
use crate::solvers::{LinearIvp, RiccatiProblem, Solution, SolutionMeta, SylvesterIvp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Largest RK4 step; the actual step divides the grid spacing.
    pub step: f64,
    /// Integration stops once any entry exceeds this in magnitude.
    pub blow_up_guard: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            step: 1e-4,
            blow_up_guard: 1e8,
        }
    }
}

/// Outcome of a raw integration: values at the nodes reached, plus the last
/// finite abscissa when the guard tripped.
struct Integration {
    values: Vec<Matrix>,
    diverged_after: Option<f64>,
}

fn integrate(
    grid: &Grid,
    y0: &Matrix,
    cfg: &OracleConfig,
    rhs: impl Fn(f64, &Matrix) -> Result<Matrix>,
) -> Result<Integration> {
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "oracle step must be positive, got {}",
            cfg.step
        )));
    }
    let h = grid.h();
    let substeps = (h / cfg.step - 1e-9).ceil().max(1.0) as usize;
    let dt = h / substeps as f64;

    let mut values = vec![y0.clone()];
    let mut y = y0.clone();
    for i in 0..grid.n_intervals() {
        let x0 = grid.node(i);
        for s in 0..substeps {
            let x = x0 + s as f64 * dt;
            let stepped = rk4_step(&rhs, x, &y, dt);
            match stepped {
                Ok(next) if next.norm_max() <= cfg.blow_up_guard => y = next,
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    return Ok(Integration {
                        values,
                        diverged_after: Some(x),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        values.push(y.clone());
    }
    Ok(Integration {
        values,
        diverged_after: None,
    })
}

fn rk4_step(rhs: &impl Fn(f64, &Matrix) -> Result<Matrix>, x: f64, y: &Matrix, dt: f64) -> Result<Matrix> {
    let k1 = rhs(x, y)?;
    let k2 = rhs(x + dt / 2.0, &y.add(&k1.scale(dt / 2.0)?)?)?;
    let k3 = rhs(x + dt / 2.0, &y.add(&k2.scale(dt / 2.0)?)?)?;
    let k4 = rhs(x + dt, &y.add(&k3.scale(dt)?)?)?;
    let incr = k1.add(&k2.scale(2.0)?)?.add(&k3.scale(2.0)?)?.add(&k4)?;
    y.add(&incr.scale(dt / 6.0)?)
}

/// Clamps stage abscissae that drift past the domain end by rounding.
fn eval_at(c: &CoeffMatrix, x: f64) -> Result<Matrix> {
    let (lo, hi) = c.domain();
    c.eval(x.clamp(lo, hi))
}

pub fn rk4_linear(p: &LinearIvp, cfg: &OracleConfig) -> Result<Solution> {
    let run = integrate(&p.grid, &p.c, cfg, |x, u| {
        eval_at(&p.a, x)?.mul(u)?.add(&eval_at(&p.forcing, x)?)
    })?;
    if let Some(x) = run.diverged_after {
        return Err(Error::Divergence { last_finite_x: x });
    }
    Ok(plain(p.grid, run.values))
}

pub fn rk4_sylvester(p: &SylvesterIvp, cfg: &OracleConfig) -> Result<Solution> {
    let run = integrate(&p.grid, &p.u0, cfg, |x, u| {
        eval_at(&p.a, x)?
            .mul(u)?
            .add(&u.mul(&eval_at(&p.b, x)?)?)?
            .add(&eval_at(&p.p, x)?)
    })?;
    if let Some(x) = run.diverged_after {
        return Err(Error::Divergence { last_finite_x: x });
    }
    Ok(plain(p.grid, run.values))
}

/// Reference Riccati solution. Divergence is not an error here: the values
/// stop at the last node reached and `blow_up_node` is the first node that
/// was not.
pub fn rk4_riccati(p: &RiccatiProblem, cfg: &OracleConfig) -> Result<OracleRiccati> {
    let run = integrate(&p.grid, &p.w0, cfg, |x, w| {
        let (a, b, pm, q) = (
            eval_at(&p.a, x)?,
            eval_at(&p.b, x)?,
            eval_at(&p.p, x)?,
            eval_at(&p.q, x)?,
        );
        a.mul(w)?.add(&q)?.sub(&w.mul(&pm)?.mul(w)?)?.sub(&w.mul(&b)?)
    })?;
    let reached = run.values.len();
    let mut solution = plain(p.grid, run.values);
    if run.diverged_after.is_some() {
        solution.meta.blow_up_node = Some(reached);
    }
    Ok(OracleRiccati {
        solution,
        last_finite_x: run.diverged_after,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRiccati {
    pub solution: Solution,
    /// Abscissa of the last finite RK4 state when the guard tripped.
    pub last_finite_x: Option<f64>,
}

impl OracleRiccati {
    pub fn into_result(self) -> Result<Solution> {
        match self.last_finite_x {
            Some(x) => Err(Error::Divergence { last_finite_x: x }),
            None => Ok(self.solution),
        }
    }
}

fn plain(grid: Grid, values: Vec<Matrix>) -> Solution {
    Solution {
        grid,
        values,
        meta: SolutionMeta::default(),
    }
}

/// Sup over the nodes both solutions reached of the max-abs difference.
pub fn compare(a: &Solution, b: &Solution) -> Result<f64> {
    compare_until(a, b, usize::MAX)
}

/// As [`compare`], restricted further to nodes below `limit`.
pub fn compare_until(a: &Solution, b: &Solution, limit: usize) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let common = a.values.len().min(b.values.len()).min(limit);
    let mut worst = 0.0f64;
    for i in 0..common {
        worst = worst.max(a.values[i].max_abs_diff(&b.values[i])?);
    }
    Ok(worst)
}
