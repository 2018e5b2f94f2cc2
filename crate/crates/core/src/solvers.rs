//! Solvers built on the propagator tables.
//!
//! * forced linear systems `U' = A·U + f`: `U = E[A]·(C + ∫ F[-A]·f)`
//! * n-th order scalar equations, through the companion matrix
//! * Sylvester-type equations `U' = A·U + U·B + P`:
//!   `U = E[A]·(U0 + ∫ F[-A]·P·E[-B])·F[B]`
//! * matrix Riccati equations `W' + W·P·W + W·B - A·W - Q = 0`, by block
//!   linearization from either side, or by composing a particular solution
//!   with a fractional-linear correction.
//!
//! Every integral is anchored at the first grid node, so problems whose
//! coefficients are singular at zero can be posed on a shifted interval.

use crate::coeff::CoeffMatrix;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::series::{cumulative_integral, propagate, sample, Grid, Ordering, PropagatorTable, SeriesConfig};

/// `|det|` below which a Riccati denominator is treated as singular. The
/// denominator starts at the identity, so this is relative to 1.
pub const BLOW_UP_DET_THRESHOLD: f64 = 1e-10;

/// Per-propagator diagnostics carried in a [`Solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSummary {
    pub label: String,
    pub terms_used: usize,
    pub last_term_norm: f64,
    pub tail_bound: f64,
}

impl PropagatorSummary {
    pub fn of(label: impl Into<String>, t: &PropagatorTable) -> Self {
        PropagatorSummary {
            label: label.into(),
            terms_used: t.terms_used,
            last_term_norm: t.last_term_norm,
            tail_bound: t.tail_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionMeta {
    pub propagators: Vec<PropagatorSummary>,
    /// Largest centered-difference residual of the solved equation.
    pub max_residual: Option<f64>,
    /// First node at which the solution ceased to exist. `values` stops
    /// just before it.
    pub blow_up_node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub grid: Grid,
    /// One value per node, up to (excluding) any blow-up node.
    pub values: Vec<Matrix>,
    pub meta: SolutionMeta,
}

impl Solution {
    pub fn blow_up_x(&self) -> Option<f64> {
        self.meta.blow_up_node.map(|i| self.grid.node(i))
    }

    pub fn last(&self) -> &Matrix {
        self.values.last().expect("a solution always holds its initial value")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearIvp {
    pub a: CoeffMatrix,
    pub forcing: CoeffMatrix,
    /// State at the first grid node, `n × 1`.
    pub c: Matrix,
    pub grid: Grid,
}

impl LinearIvp {
    pub fn new(a: CoeffMatrix, forcing: CoeffMatrix, c: Matrix, grid: Grid) -> Result<Self> {
        require_square("A", &a)?;
        let n = a.rows();
        require_shape("forcing", forcing.shape(), (n, 1))?;
        require_shape("C", c.shape(), (n, 1))?;
        require_inside(&grid, &[&a, &forcing])?;
        Ok(LinearIvp { a, forcing, c, grid })
    }

    /// Unforced system.
    pub fn homogeneous(a: CoeffMatrix, c: Matrix, grid: Grid) -> Result<Self> {
        let forcing = CoeffMatrix::zeros(a.rows(), 1, a.domain())?;
        LinearIvp::new(a, forcing, c, grid)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterIvp {
    pub a: CoeffMatrix,
    pub b: CoeffMatrix,
    pub p: CoeffMatrix,
    pub u0: Matrix,
    pub grid: Grid,
}

impl SylvesterIvp {
    pub fn new(a: CoeffMatrix, b: CoeffMatrix, p: CoeffMatrix, u0: Matrix, grid: Grid) -> Result<Self> {
        require_square("A", &a)?;
        require_square("B", &b)?;
        let (n, m) = (a.rows(), b.rows());
        require_shape("P", p.shape(), (n, m))?;
        require_shape("U0", u0.shape(), (n, m))?;
        require_inside(&grid, &[&a, &b, &p])?;
        Ok(SylvesterIvp { a, b, p, u0, grid })
    }
}

/// `W' + W·P·W + W·B - A·W - Q = 0` with `W` of shape `n × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiProblem {
    pub a: CoeffMatrix,
    pub b: CoeffMatrix,
    pub p: CoeffMatrix,
    pub q: CoeffMatrix,
    pub w0: Matrix,
    pub grid: Grid,
}

impl RiccatiProblem {
    pub fn new(a: CoeffMatrix, b: CoeffMatrix, p: CoeffMatrix, q: CoeffMatrix, w0: Matrix, grid: Grid) -> Result<Self> {
        require_square("A", &a)?;
        require_square("B", &b)?;
        let (n, m) = (a.rows(), b.rows());
        require_shape("P", p.shape(), (m, n))?;
        require_shape("Q", q.shape(), (n, m))?;
        require_shape("W0", w0.shape(), (n, m))?;
        require_inside(&grid, &[&a, &b, &p, &q])?;
        Ok(RiccatiProblem { a, b, p, q, w0, grid })
    }

    /// `(n, m)`: `W` is `n × m`.
    pub fn dims(&self) -> (usize, usize) {
        (self.a.rows(), self.b.rows())
    }

    pub fn with_initial(&self, w0: Matrix) -> Result<Self> {
        RiccatiProblem::new(
            self.a.clone(),
            self.b.clone(),
            self.p.clone(),
            self.q.clone(),
            w0,
            self.grid,
        )
    }
}

/// Column-stacked factors `[W1; W2]` of the left-ordered block form.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiFactors {
    /// `n × m` numerator at every node.
    pub w1: Vec<Matrix>,
    /// `m × m` denominator at every node.
    pub w2: Vec<Matrix>,
    pub blow_up_node: Option<usize>,
}

/// Row-stacked factors `[U1, U2]` of the right-ordered block form.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiRowFactors {
    /// `n × m` numerator at every node.
    pub u1: Vec<Matrix>,
    /// `n × n` denominator at every node.
    pub u2: Vec<Matrix>,
    pub blow_up_node: Option<usize>,
}

/// Builds the first-order system for
/// `u⁽ⁿ⁾ + a₁u⁽ⁿ⁻¹⁾ + … + aₙu = f`.
///
/// The state is `(u⁽ⁿ⁻¹⁾, …, u', u)`, so the last component is `u` itself.
/// `u0` lists the initial state in that same order.
pub fn companion_from_scalar(a: &[Expr], f: &Expr, u0: &[f64], grid: Grid) -> Result<LinearIvp> {
    let n = a.len();
    if n == 0 {
        return Err(Error::Problem("an n-th order equation needs n >= 1".into()));
    }
    if u0.len() != n {
        return Err(Error::Problem(format!(
            "{n}-th order equation needs {n} initial values, got {}",
            u0.len()
        )));
    }
    let mut entries = vec![Expr::Num(0.0); n * n];
    for (k, ak) in a.iter().enumerate() {
        entries[k] = ak.clone().negated();
    }
    for r in 1..n {
        entries[r * n + r - 1] = Expr::Num(1.0);
    }
    let domain = (grid.x_lo(), grid.x_hi());
    let a_mat = CoeffMatrix::new(n, n, entries, domain)?;
    let mut forcing = vec![Expr::Num(0.0); n];
    forcing[0] = f.clone();
    let forcing = CoeffMatrix::new(n, 1, forcing, domain)?;
    LinearIvp::new(a_mat, forcing, Matrix::column(u0)?, grid)
}

pub fn solve_linear_ivp(p: &LinearIvp, cfg: &SeriesConfig) -> Result<Solution> {
    let grid = &p.grid;
    let a = sample(&p.a, grid)?;
    let f = sample(&p.forcing, grid)?;
    let e_a = propagate(Ordering::Left, &a, grid, cfg)?;
    let f_neg_a = propagate(Ordering::Right, &negate_all(&a), grid, cfg)?;

    let integrand = zip_mul(&f_neg_a.values, &f)?;
    let particular = cumulative_integral(&integrand, grid)?;
    let values = e_a
        .values
        .iter()
        .zip(&particular)
        .map(|(e, s)| e.mul(&p.c.add(s)?))
        .collect::<Result<Vec<_>>>()?;

    let residual = centered_residual(&values, grid, |i, u| a[i].mul(u)?.add(&f[i]))?;
    Ok(Solution {
        grid: *grid,
        values,
        meta: SolutionMeta {
            propagators: vec![
                PropagatorSummary::of("E[A]", &e_a),
                PropagatorSummary::of("F[-A]", &f_neg_a),
            ],
            max_residual: Some(residual),
            blow_up_node: None,
        },
    })
}

pub fn solve_sylvester(p: &SylvesterIvp, cfg: &SeriesConfig) -> Result<Solution> {
    let grid = &p.grid;
    let a = sample(&p.a, grid)?;
    let b = sample(&p.b, grid)?;
    let forcing = sample(&p.p, grid)?;
    let e_a = propagate(Ordering::Left, &a, grid, cfg)?;
    let f_neg_a = propagate(Ordering::Right, &negate_all(&a), grid, cfg)?;
    let e_neg_b = propagate(Ordering::Left, &negate_all(&b), grid, cfg)?;
    let f_b = propagate(Ordering::Right, &b, grid, cfg)?;

    let integrand = f_neg_a
        .values
        .iter()
        .zip(&forcing)
        .zip(&e_neg_b.values)
        .map(|((l, mid), r)| l.mul(mid)?.mul(r))
        .collect::<Result<Vec<_>>>()?;
    let integral = cumulative_integral(&integrand, grid)?;
    let values = (0..grid.len())
        .map(|i| e_a.values[i].mul(&p.u0.add(&integral[i])?)?.mul(&f_b.values[i]))
        .collect::<Result<Vec<_>>>()?;

    let residual = centered_residual(&values, grid, |i, u| a[i].mul(u)?.add(&u.mul(&b[i])?)?.add(&forcing[i]))?;
    Ok(Solution {
        grid: *grid,
        values,
        meta: SolutionMeta {
            propagators: vec![
                PropagatorSummary::of("E[A]", &e_a),
                PropagatorSummary::of("F[-A]", &f_neg_a),
                PropagatorSummary::of("E[-B]", &e_neg_b),
                PropagatorSummary::of("F[B]", &f_b),
            ],
            max_residual: Some(residual),
            blow_up_node: None,
        },
    })
}

/// Node samples of the four Riccati coefficients.
struct RiccatiSamples {
    a: Vec<Matrix>,
    b: Vec<Matrix>,
    p: Vec<Matrix>,
    q: Vec<Matrix>,
}

impl RiccatiSamples {
    fn new(p: &RiccatiProblem) -> Result<Self> {
        Ok(RiccatiSamples {
            a: sample(&p.a, &p.grid)?,
            b: sample(&p.b, &p.grid)?,
            p: sample(&p.p, &p.grid)?,
            q: sample(&p.q, &p.grid)?,
        })
    }

    /// `dW/dx = A·W + Q - W·P·W - W·B` at node `i`.
    fn rhs(&self, i: usize, w: &Matrix) -> Result<Matrix> {
        let wp = w.mul(&self.p[i])?;
        self.a[i]
            .mul(w)?
            .add(&self.q[i])?
            .sub(&wp.mul(w)?)?
            .sub(&w.mul(&self.b[i])?)
    }
}

/// `W = W1·W2⁻¹` with `[W1; W2] = E[[A, Q; P, B]]·[W0; I]`.
pub fn solve_riccati_block_e(p: &RiccatiProblem, cfg: &SeriesConfig) -> Result<(Solution, RiccatiFactors)> {
    let grid = &p.grid;
    let (n, m) = p.dims();
    let s = RiccatiSamples::new(p)?;
    let block = (0..grid.len())
        .map(|i| Matrix::from_blocks(&[&[&s.a[i], &s.q[i]], &[&s.p[i], &s.b[i]]]))
        .collect::<Result<Vec<_>>>()?;
    let e = propagate(Ordering::Left, &block, grid, cfg)?;
    let init = Matrix::from_blocks(&[&[&p.w0], &[&Matrix::identity(m)]])?;

    let mut w1 = Vec::with_capacity(grid.len());
    let mut w2 = Vec::with_capacity(grid.len());
    for v in &e.values {
        let stack = v.mul(&init)?;
        w1.push(stack.submatrix(0, 0, n, m));
        w2.push(stack.submatrix(n, 0, m, m));
    }

    let (values, blow_up_node) = fractional(&w2, |i, inv| w1[i].mul(inv))?;
    let residual = centered_residual(&values, grid, |i, w| s.rhs(i, w))?;
    let solution = Solution {
        grid: *grid,
        values,
        meta: SolutionMeta {
            propagators: vec![PropagatorSummary::of("E[A,Q;P,B]", &e)],
            max_residual: Some(residual),
            blow_up_node,
        },
    };
    Ok((solution, RiccatiFactors { w1, w2, blow_up_node }))
}

/// `W = U2⁻¹·U1` with `[U1, U2] = [W0, I]·F[[-B, P; Q, -A]]`.
pub fn solve_riccati_block_f(p: &RiccatiProblem, cfg: &SeriesConfig) -> Result<(Solution, RiccatiRowFactors)> {
    let grid = &p.grid;
    let (n, m) = p.dims();
    let s = RiccatiSamples::new(p)?;
    let block = (0..grid.len())
        .map(|i| Matrix::from_blocks(&[&[&s.b[i].neg(), &s.p[i]], &[&s.q[i], &s.a[i].neg()]]))
        .collect::<Result<Vec<_>>>()?;
    let f = propagate(Ordering::Right, &block, grid, cfg)?;
    let init = Matrix::from_blocks(&[&[&p.w0, &Matrix::identity(n)]])?;

    let mut u1 = Vec::with_capacity(grid.len());
    let mut u2 = Vec::with_capacity(grid.len());
    for v in &f.values {
        let row = init.mul(v)?;
        u1.push(row.submatrix(0, 0, n, m));
        u2.push(row.submatrix(0, m, n, n));
    }

    let (values, blow_up_node) = fractional(&u2, |i, inv| inv.mul(&u1[i]))?;
    let residual = centered_residual(&values, grid, |i, w| s.rhs(i, w))?;
    let solution = Solution {
        grid: *grid,
        values,
        meta: SolutionMeta {
            propagators: vec![PropagatorSummary::of("F[-B,P;Q,-A]", &f)],
            max_residual: Some(residual),
            blow_up_node,
        },
    };
    Ok((solution, RiccatiRowFactors { u1, u2, blow_up_node }))
}

/// Max-abs of `U2·W1 - U1·W2` over all nodes. Identically zero in exact
/// arithmetic, so it measures how far the two block forms disagree.
pub fn bilinear_residual(left: &RiccatiFactors, right: &RiccatiRowFactors) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..left.w1.len() {
        let d = right.u2[i].mul(&left.w1[i])?.sub(&right.u1[i].mul(&left.w2[i])?)?;
        worst = worst.max(d.norm_max());
    }
    Ok(worst)
}

/// General solution through the particular solution `Y` with `Y(x_lo) = 0`:
///
/// ```text
/// W = Y + E[A - Y·P]·W0·(I + (∫R)·W0)⁻¹·F[-(B + P·Y)]
/// R = F[-(B + P·Y)]·P·E[A - Y·P]
/// ```
pub fn riccati_from_particular(p: &RiccatiProblem, cfg: &SeriesConfig) -> Result<Solution> {
    let grid = &p.grid;
    let (n, m) = p.dims();
    let (y, _) = solve_riccati_block_e(&p.with_initial(Matrix::zeros(n, m))?, cfg)?;
    if let Some(node) = y.meta.blow_up_node {
        return Err(Error::ParticularBlowUp {
            node,
            x: grid.node(node),
        });
    }
    let y = y.values;
    let s = RiccatiSamples::new(p)?;

    let left_gen = (0..grid.len())
        .map(|i| s.a[i].sub(&y[i].mul(&s.p[i])?))
        .collect::<Result<Vec<_>>>()?;
    let right_gen = (0..grid.len())
        .map(|i| Ok(s.b[i].add(&s.p[i].mul(&y[i])?)?.neg()))
        .collect::<Result<Vec<_>>>()?;
    let e = propagate(Ordering::Left, &left_gen, grid, cfg)?;
    let f = propagate(Ordering::Right, &right_gen, grid, cfg)?;

    let r = (0..grid.len())
        .map(|i| f.values[i].mul(&s.p[i])?.mul(&e.values[i]))
        .collect::<Result<Vec<_>>>()?;
    let int_r = cumulative_integral(&r, grid)?;
    let bracket = int_r
        .iter()
        .map(|ir| Matrix::identity(m).add(&ir.mul(&p.w0)?))
        .collect::<Result<Vec<_>>>()?;

    let (values, blow_up_node) = fractional(&bracket, |i, inv| {
        let correction = e.values[i].mul(&p.w0)?.mul(inv)?.mul(&f.values[i])?;
        y[i].add(&correction)
    })?;
    let residual = centered_residual(&values, grid, |i, w| s.rhs(i, w))?;
    Ok(Solution {
        grid: *grid,
        values,
        meta: SolutionMeta {
            propagators: vec![
                PropagatorSummary::of("E[A-YP]", &e),
                PropagatorSummary::of("F[-(B+PY)]", &f),
            ],
            max_residual: Some(residual),
            blow_up_node,
        },
    })
}

/// `y' + a·y² + b·y + c = 0` as the 1×1 Riccati problem with `P = a`,
/// `B = b`, `A = 0`, `Q = -c`.
pub fn scalar_riccati_problem(a: &Expr, b: &Expr, c: &Expr, y0: f64, grid: Grid) -> Result<RiccatiProblem> {
    let domain = (grid.x_lo(), grid.x_hi());
    let one = |e: Expr| CoeffMatrix::new(1, 1, vec![e], domain);
    RiccatiProblem::new(
        CoeffMatrix::zeros(1, 1, domain)?,
        one(b.clone())?,
        one(a.clone())?,
        one(c.clone().negated())?,
        Matrix::scalar(y0)?,
        grid,
    )
}

pub fn scalar_riccati(a: &Expr, b: &Expr, c: &Expr, y0: f64, grid: Grid, cfg: &SeriesConfig) -> Result<Solution> {
    let p = scalar_riccati_problem(a, b, c, y0, grid)?;
    Ok(solve_riccati_block_e(&p, cfg)?.0)
}

/// Applies `assemble(i, denom⁻¹)` node by node until the denominator loses
/// invertibility. The denominator starts at the identity; a determinant that
/// drops below [`BLOW_UP_DET_THRESHOLD`] in magnitude, or changes sign
/// between nodes, marks the blow-up node.
fn fractional(
    denominators: &[Matrix],
    mut assemble: impl FnMut(usize, &Matrix) -> Result<Matrix>,
) -> Result<(Vec<Matrix>, Option<usize>)> {
    let mut values = Vec::with_capacity(denominators.len());
    for (i, d) in denominators.iter().enumerate() {
        let det = d.det()?;
        if det.is_nan() || det <= BLOW_UP_DET_THRESHOLD {
            return Ok((values, Some(i)));
        }
        match d.inverse() {
            Ok(inv) => match assemble(i, &inv) {
                Ok(v) => values.push(v),
                Err(Error::NonFinite { .. }) => return Ok((values, Some(i))),
                Err(e) => return Err(e),
            },
            Err(Error::Singular { .. }) => return Ok((values, Some(i))),
            Err(e) => return Err(e),
        }
    }
    Ok((values, None))
}

/// Max over interior nodes of `‖(v[i+1] - v[i-1]) / 2h - rhs(i, v[i])‖`.
fn centered_residual(values: &[Matrix], grid: &Grid, rhs: impl Fn(usize, &Matrix) -> Result<Matrix>) -> Result<f64> {
    let h = grid.h();
    let mut worst = 0.0f64;
    for i in 1..values.len().saturating_sub(1) {
        let deriv = values[i + 1].sub(&values[i - 1])?.scale(0.5 / h)?;
        worst = worst.max(deriv.max_abs_diff(&rhs(i, &values[i])?)?);
    }
    Ok(worst)
}

fn negate_all(samples: &[Matrix]) -> Vec<Matrix> {
    samples.iter().map(Matrix::neg).collect()
}

fn zip_mul(left: &[Matrix], right: &[Matrix]) -> Result<Vec<Matrix>> {
    left.iter().zip(right).map(|(l, r)| l.mul(r)).collect()
}

fn require_square(name: &str, c: &CoeffMatrix) -> Result<()> {
    if c.rows() == c.cols() {
        Ok(())
    } else {
        Err(Error::Problem(format!(
            "{name} must be square, got {}x{}",
            c.rows(),
            c.cols()
        )))
    }
}

fn require_shape(name: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Problem(format!(
            "{name} must be {}x{}, got {}x{}",
            want.0, want.1, got.0, got.1
        )))
    }
}

fn require_inside(grid: &Grid, coeffs: &[&CoeffMatrix]) -> Result<()> {
    for c in coeffs {
        let (lo, hi) = c.domain();
        if grid.x_lo() < lo || grid.x_hi() > hi {
            return Err(Error::OutsideDomain {
                x: if grid.x_lo() < lo { grid.x_lo() } else { grid.x_hi() },
                lo,
                hi,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn grid(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    fn cm(rows: &[&[&str]]) -> CoeffMatrix {
        CoeffMatrix::parse(rows, (0.0, 1.0)).unwrap()
    }

    fn scalar_problem(a: &str, b: &str, p: &str, q: &str, w0: f64, g: Grid) -> RiccatiProblem {
        let d = (g.x_lo(), g.x_hi());
        let c = |s: &str| CoeffMatrix::parse(&[[s]], d).unwrap();
        RiccatiProblem::new(c(a), c(b), c(p), c(q), Matrix::scalar(w0).unwrap(), g).unwrap()
    }

    fn cfg() -> SeriesConfig {
        SeriesConfig::default()
    }

    #[test]
    fn companion_layout() {
        let g = grid(2);
        let ivp = companion_from_scalar(
            &[parse("0").unwrap(), parse("1").unwrap()],
            &parse("0").unwrap(),
            &[0.0, 1.0],
            g,
        )
        .unwrap();
        assert_eq!(
            ivp.a.eval(0.3).unwrap(),
            Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).unwrap()
        );

        let ivp = companion_from_scalar(&[parse("x").unwrap()], &parse("0").unwrap(), &[1.0], g).unwrap();
        assert_eq!(ivp.a.eval(0.5).unwrap(), Matrix::scalar(-0.5).unwrap());

        // Airy: u'' - x u = 0, so a2 = -x.
        let ivp = companion_from_scalar(
            &[parse("0").unwrap(), parse("-x").unwrap()],
            &parse("0").unwrap(),
            &[0.0, 1.0],
            g,
        )
        .unwrap();
        assert_eq!(
            ivp.a.eval(0.5).unwrap(),
            Matrix::from_rows(&[[0.0, 0.5], [1.0, 0.0]]).unwrap()
        );
        assert_eq!(ivp.forcing.eval(0.5).unwrap(), Matrix::zeros(2, 1));

        let ivp =
            companion_from_scalar(&vec![parse("0").unwrap(); 3], &parse("x").unwrap(), &[1.0, 2.0, 3.0], g).unwrap();
        assert_eq!(
            ivp.a.eval(0.0).unwrap(),
            Matrix::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap()
        );
        assert_eq!(
            ivp.forcing.eval(0.5).unwrap(),
            Matrix::column(&[0.5, 0.0, 0.0]).unwrap()
        );
        assert_eq!(ivp.c, Matrix::column(&[1.0, 2.0, 3.0]).unwrap());

        assert!(companion_from_scalar(&[], &parse("0").unwrap(), &[], g).is_err());
        assert!(companion_from_scalar(&[parse("0").unwrap()], &parse("0").unwrap(), &[1.0, 2.0], g).is_err());
    }

    #[test]
    fn zero_system_keeps_initial_value() {
        let g = grid(10);
        let c = Matrix::column(&[3.0, -2.0]).unwrap();
        let ivp = LinearIvp::homogeneous(CoeffMatrix::zeros(2, 2, (0.0, 1.0)).unwrap(), c.clone(), g).unwrap();
        let s = solve_linear_ivp(&ivp, &cfg()).unwrap();
        assert!(s.values.iter().all(|v| *v == c));
    }

    #[test]
    fn harmonic_oscillator() {
        let g = grid(200);
        // u'' + u = 0, state (u', u) = (0, 1).
        let ivp = companion_from_scalar(
            &[parse("0").unwrap(), parse("1").unwrap()],
            &parse("0").unwrap(),
            &[0.0, 1.0],
            g,
        )
        .unwrap();
        let s = solve_linear_ivp(&ivp, &cfg()).unwrap();
        assert!((s.last().get(1, 0) - 1f64.cos()).abs() < 1e-8);
        assert!((s.last().get(0, 0) + 1f64.sin()).abs() < 1e-8);
        assert_eq!(s.values[0], ivp.c);
    }

    #[test]
    fn forced_first_order() {
        // u' = u + 1, u(0) = 0.
        let g = grid(200);
        let ivp = LinearIvp::new(cm(&[&["1"]]), cm(&[&["1"]]), Matrix::scalar(0.0).unwrap(), g).unwrap();
        let s = solve_linear_ivp(&ivp, &cfg()).unwrap();
        assert!((s.last().get(0, 0) - (1f64.exp() - 1.0)).abs() < 1e-8);
        assert!(s.meta.max_residual.unwrap() < 1e-4);
    }

    #[test]
    fn linear_ivp_shape_validation() {
        let g = grid(2);
        assert!(LinearIvp::new(cm(&[&["1", "0"]]), cm(&[&["1"]]), Matrix::scalar(0.0).unwrap(), g).is_err());
        assert!(LinearIvp::new(cm(&[&["1"]]), cm(&[&["1"]]), Matrix::column(&[0.0, 1.0]).unwrap(), g).is_err());
        let wide = Grid::new(0.0, 2.0, 2).unwrap();
        assert!(matches!(
            LinearIvp::new(cm(&[&["1"]]), cm(&[&["1"]]), Matrix::scalar(0.0).unwrap(), wide),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn sylvester_constant_case_matches_expm() {
        let g = grid(200);
        let a_m = Matrix::from_rows(&[[0.2, -0.5], [0.7, -0.1]]).unwrap();
        let b_m = Matrix::from_rows(&[[-0.3]]).unwrap();
        let u0 = Matrix::column(&[1.0, -2.0]).unwrap();
        let d = (0.0, 1.0);
        let ivp = SylvesterIvp::new(
            CoeffMatrix::constant(&a_m, d).unwrap(),
            CoeffMatrix::constant(&b_m, d).unwrap(),
            CoeffMatrix::zeros(2, 1, d).unwrap(),
            u0.clone(),
            g,
        )
        .unwrap();
        let s = solve_sylvester(&ivp, &cfg()).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let x = g.node(i);
            let exact = a_m
                .scale(x)
                .unwrap()
                .expm()
                .unwrap()
                .mul(&u0)
                .unwrap()
                .mul(&b_m.scale(x).unwrap().expm().unwrap())
                .unwrap();
            assert!(v.max_abs_diff(&exact).unwrap() < 1e-8, "node {i}");
        }
    }

    #[test]
    fn sylvester_pure_integration() {
        let g = grid(10);
        let d = (0.0, 1.0);
        let ivp = SylvesterIvp::new(
            CoeffMatrix::zeros(1, 1, d).unwrap(),
            CoeffMatrix::zeros(1, 1, d).unwrap(),
            cm(&[&["x"]]),
            Matrix::scalar(0.0).unwrap(),
            g,
        )
        .unwrap();
        let s = solve_sylvester(&ivp, &cfg()).unwrap();
        assert!((s.last().get(0, 0) - 0.5).abs() < 1e-12);

        let ivp = SylvesterIvp::new(
            CoeffMatrix::zeros(2, 2, d).unwrap(),
            CoeffMatrix::zeros(1, 1, d).unwrap(),
            cm(&[&["1"], &["3*x^2"]]),
            Matrix::column(&[1.0, 1.0]).unwrap(),
            g,
        )
        .unwrap();
        let s = solve_sylvester(&ivp, &cfg()).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let x = g.node(i);
            assert!(
                v.max_abs_diff(&Matrix::column(&[1.0 + x, 1.0 + x.powi(3)]).unwrap())
                    .unwrap()
                    < 1e-14
            );
        }
    }

    #[test]
    fn riccati_decaying_scalar() {
        let g = grid(200);
        let p = scalar_problem("0", "0", "1", "0", 1.0, g);
        let (s, f) = solve_riccati_block_e(&p, &cfg()).unwrap();
        assert!((s.last().get(0, 0) - 0.5).abs() < 1e-9);
        assert_eq!(s.meta.blow_up_node, None);
        assert_eq!(f.w2[0], Matrix::identity(1));
        assert_eq!(f.w1[0], p.w0);
        assert_eq!(s.values[0], p.w0);
        let (sf, _) = solve_riccati_block_f(&p, &cfg()).unwrap();
        assert!((sf.last().get(0, 0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn riccati_finite_escape_at_grid_end() {
        let g = grid(200);
        let p = scalar_problem("0", "0", "-1", "0", 1.0, g);
        let (s, _) = solve_riccati_block_e(&p, &cfg()).unwrap();
        assert_eq!(s.meta.blow_up_node, Some(200));
        assert_eq!(s.values.len(), 200);
        assert_eq!(s.blow_up_x(), Some(1.0));
        let (sf, _) = solve_riccati_block_f(&p, &cfg()).unwrap();
        assert_eq!(sf.meta.blow_up_node, Some(200));
    }

    #[test]
    fn riccati_finite_escape_between_nodes() {
        // Escape at x = 1/0.8 = 1.25, which is not a node of this grid.
        let g = Grid::new(0.0, 2.0, 30).unwrap();
        let p = scalar_problem("0", "0", "-1", "0", 0.8, g);
        let (s, _) = solve_riccati_block_e(&p, &cfg()).unwrap();
        let node = s.meta.blow_up_node.unwrap();
        assert!(g.node(node) > 1.25 && g.node(node - 1) < 1.25);
    }

    #[test]
    fn riccati_zero_solution() {
        let g = grid(50);
        let p = scalar_problem("0.3", "x", "1", "0", 0.0, g);
        let (s, _) = solve_riccati_block_f(&p, &cfg()).unwrap();
        assert!(s.values.iter().all(|v| v.norm_max() == 0.0));
    }

    #[test]
    fn riccati_without_quadratic_term_is_sylvester() {
        let g = grid(200);
        let d = (0.0, 1.0);
        let a_m = Matrix::from_rows(&[[0.1, 0.4], [-0.3, 0.2]]).unwrap();
        let b_m = Matrix::from_rows(&[[0.5]]).unwrap();
        let w0 = Matrix::column(&[0.7, -0.2]).unwrap();
        let p = RiccatiProblem::new(
            CoeffMatrix::constant(&a_m, d).unwrap(),
            CoeffMatrix::constant(&b_m, d).unwrap(),
            CoeffMatrix::zeros(1, 2, d).unwrap(),
            CoeffMatrix::zeros(2, 1, d).unwrap(),
            w0.clone(),
            g,
        )
        .unwrap();
        let (s, _) = solve_riccati_block_e(&p, &cfg()).unwrap();
        // W' = A W - W B.
        let syl = SylvesterIvp::new(
            CoeffMatrix::constant(&a_m, d).unwrap(),
            CoeffMatrix::constant(&b_m.neg(), d).unwrap(),
            CoeffMatrix::zeros(2, 1, d).unwrap(),
            w0,
            g,
        )
        .unwrap();
        let reference = solve_sylvester(&syl, &cfg()).unwrap();
        for (a, b) in s.values.iter().zip(&reference.values) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-8);
        }
    }

    #[test]
    fn scalar_riccati_examples() {
        let g = grid(200);
        let c = cfg();
        let n = |s: &str| parse(s).unwrap();
        let y = scalar_riccati(&n("1"), &n("0"), &n("0"), 1.0, g, &c).unwrap();
        assert!((y.last().get(0, 0) - 0.5).abs() < 1e-9);
        let y = scalar_riccati(&n("0"), &n("1"), &n("-1"), 0.0, g, &c).unwrap();
        assert!((y.last().get(0, 0) - (1.0 - (-1f64).exp())).abs() < 1e-8);
        let y = scalar_riccati(&n("1"), &n("0"), &n("1"), 0.0, g, &c).unwrap();
        assert!((y.last().get(0, 0) + 1f64.tan()).abs() < 1e-6);
    }

    #[test]
    fn particular_composition_reduces_correctly() {
        let g = grid(200);
        let c = cfg();
        // W0 = 0: W is the particular solution itself.
        let p = scalar_problem("0.2", "x", "0.5", "1 + x", 0.0, g);
        let w = riccati_from_particular(&p, &c).unwrap();
        let (y, _) = solve_riccati_block_e(&p, &c).unwrap();
        assert_eq!(w.values, y.values);

        // Q = 0: Y vanishes and the decaying example is recovered.
        let p = scalar_problem("0", "0", "1", "0", 1.0, g);
        let w = riccati_from_particular(&p, &c).unwrap();
        assert!((w.last().get(0, 0) - 0.5).abs() < 1e-9);

        let p = scalar_problem("0.3*x", "-0.2", "0.4", "0.5 - x^2", 0.6, g);
        let w = riccati_from_particular(&p, &c).unwrap();
        let (e, _) = solve_riccati_block_e(&p, &c).unwrap();
        for (a, b) in w.values.iter().zip(&e.values) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-7);
        }
    }

    #[test]
    fn particular_blow_up_aborts() {
        // Y' = 1 + Y² from Y(0) = 0 is tan x, which escapes at pi/2.
        let g = Grid::new(0.0, 2.0, 40).unwrap();
        let p = scalar_problem("0", "0", "-1", "1", 0.5, g);
        assert!(matches!(
            riccati_from_particular(&p, &cfg()),
            Err(Error::ParticularBlowUp { .. })
        ));
    }

    #[test]
    fn riccati_shape_validation() {
        let g = grid(2);
        let d = (0.0, 1.0);
        let z = |r, c| CoeffMatrix::zeros(r, c, d).unwrap();
        // n = 2, m = 1: P must be 1x2, Q 2x1.
        assert!(RiccatiProblem::new(z(2, 2), z(1, 1), z(1, 2), z(2, 1), Matrix::zeros(2, 1), g).is_ok());
        assert!(RiccatiProblem::new(z(2, 2), z(1, 1), z(2, 1), z(2, 1), Matrix::zeros(2, 1), g).is_err());
        assert!(RiccatiProblem::new(z(2, 2), z(1, 1), z(1, 2), z(2, 1), Matrix::zeros(1, 2), g).is_err());
    }
}
