//! Seeded random problem generators shared by the integration tests.
#![allow(dead_code)]

use ltvprop::coeff::CoeffMatrix;
use ltvprop::series::Grid;
use ltvprop::solvers::{solve_riccati_block_e, LinearIvp, RiccatiProblem};
use ltvprop::{Matrix, SeriesConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

pub fn constant_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| unit(rng)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `c0 + c1*x + c2*x^2` truncated to `degree`, coefficients drawn from
/// `[-scale, scale]`.
pub fn polynomial(rng: &mut ChaCha8Rng, degree: usize, scale: f64) -> String {
    let terms: Vec<String> = (0..=degree)
        .map(|k| {
            let c = scale * unit(rng);
            match k {
                0 => format!("({c:?})"),
                1 => format!("({c:?})*x"),
                _ => format!("({c:?})*x^{k}"),
            }
        })
        .collect();
    terms.join(" + ")
}

pub fn polynomial_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    degree: usize,
    scale: f64,
    domain: (f64, f64),
) -> CoeffMatrix {
    let grid: Vec<Vec<String>> = (0..rows)
        .map(|_| (0..cols).map(|_| polynomial(rng, degree, scale)).collect())
        .collect();
    CoeffMatrix::parse(&grid, domain).unwrap()
}

/// Like [`polynomial_matrix`], but every entry's values on `[0, 1]` stay
/// within `[-scale, scale]`.
pub fn bounded_polynomial_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    degree: usize,
    scale: f64,
    domain: (f64, f64),
) -> CoeffMatrix {
    polynomial_matrix(rng, rows, cols, degree, scale / (degree + 1) as f64, domain)
}

pub fn unit_grid(n: usize) -> Grid {
    Grid::new(0.0, 1.0, n).unwrap()
}

/// Random `n × n` generator, `n ≤ max_n`, polynomial entries of degree ≤ 2
/// with coefficients in `[-1, 1]`.
pub fn random_generator(rng: &mut ChaCha8Rng, max_n: usize) -> CoeffMatrix {
    let n = rng.gen_range(1..=max_n);
    let degree = rng.gen_range(0..=2);
    polynomial_matrix(rng, n, n, degree, 1.0, (0.0, 1.0))
}

/// Random forced linear problem, `n ≤ max_n`, entries bounded by 1.
pub fn random_linear(rng: &mut ChaCha8Rng, max_n: usize, grid: Grid) -> LinearIvp {
    let n = rng.gen_range(1..=max_n);
    let domain = (grid.x_lo(), grid.x_hi());
    let (da, df) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
    let a = bounded_polynomial_matrix(rng, n, n, da, 1.0, domain);
    let f = bounded_polynomial_matrix(rng, n, 1, df, 1.0, domain);
    let c = constant_matrix(rng, n, 1);
    LinearIvp::new(a, f, c, grid).unwrap()
}

/// Options for [`random_riccati`].
pub struct RiccatiShape {
    pub max_dim_sum: usize,
    /// Scale of the quadratic coefficient `P`.
    pub p_scale: f64,
    pub nonzero_q: bool,
    pub nonzero_w0: bool,
    /// Also require the `W0 = 0` solution to stay bounded.
    pub bounded_particular: bool,
    /// Largest accepted `max-abs W` over the interval.
    pub w_cap: f64,
}

impl Default for RiccatiShape {
    fn default() -> Self {
        RiccatiShape {
            max_dim_sum: 5,
            p_scale: 0.5,
            nonzero_q: true,
            nonzero_w0: true,
            bounded_particular: false,
            w_cap: 5.0,
        }
    }
}

/// Random Riccati problem with entries bounded by 1 (`P` by `p_scale`)
/// whose solution stays bounded on the grid, found by rejection sampling.
pub fn random_riccati(rng: &mut ChaCha8Rng, shape: &RiccatiShape, grid: Grid) -> RiccatiProblem {
    let cfg = SeriesConfig::default();
    let domain = (grid.x_lo(), grid.x_hi());
    loop {
        let n = rng.gen_range(1..shape.max_dim_sum);
        let m = rng.gen_range(1..=shape.max_dim_sum - n);
        let mut poly = |r: usize, c: usize, scale: f64| {
            let d = rng.gen_range(0..=2);
            bounded_polynomial_matrix(rng, r, c, d, scale, domain)
        };
        let a = poly(n, n, 1.0);
        let b = poly(m, m, 1.0);
        let p = poly(m, n, shape.p_scale);
        let q = if shape.nonzero_q {
            poly(n, m, 1.0)
        } else {
            CoeffMatrix::zeros(n, m, domain).unwrap()
        };
        let w0 = if shape.nonzero_w0 {
            constant_matrix(rng, n, m)
        } else {
            Matrix::zeros(n, m)
        };
        let problem = RiccatiProblem::new(a, b, p, q, w0, grid).unwrap();
        if !bounded(&problem, &cfg, shape.w_cap) {
            continue;
        }
        if shape.bounded_particular && !bounded(&problem.with_initial(Matrix::zeros(n, m)).unwrap(), &cfg, shape.w_cap)
        {
            continue;
        }
        return problem;
    }
}

fn bounded(p: &RiccatiProblem, cfg: &SeriesConfig, cap: f64) -> bool {
    match solve_riccati_block_e(p, cfg) {
        Ok((s, _)) => s.meta.blow_up_node.is_none() && s.values.iter().all(|w| w.norm_max() <= cap),
        Err(_) => false,
    }
}
