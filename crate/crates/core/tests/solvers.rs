mod common;

use common::*;
use ltvprop::coeff::CoeffMatrix;
use ltvprop::oracle::{compare_until, rk4_riccati, OracleConfig};
use ltvprop::series::Grid;
use ltvprop::solvers::{
    riccati_from_particular, solve_linear_ivp, solve_riccati_block_e, solve_riccati_block_f, LinearIvp, RiccatiProblem,
    Solution,
};
use ltvprop::{Matrix, SeriesConfig};

fn cfg() -> SeriesConfig {
    SeriesConfig::default()
}

fn regrid(p: &LinearIvp, n: usize) -> LinearIvp {
    LinearIvp::new(p.a.clone(), p.forcing.clone(), p.c.clone(), unit_grid(n)).unwrap()
}

#[test]
fn linear_residual_is_second_order() {
    let mut r = rng(11);
    for _ in 0..10 {
        let p = random_linear(&mut r, 3, unit_grid(200));
        let coarse = solve_linear_ivp(&p, &cfg()).unwrap().meta.max_residual.unwrap();
        let fine = solve_linear_ivp(&regrid(&p, 400), &cfg())
            .unwrap()
            .meta
            .max_residual
            .unwrap();
        assert!(coarse <= 1e-4, "residual {coarse}");
        if coarse > 1e-9 {
            let ratio = coarse / fine;
            assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        }
    }
}

/// Nodes up to `first blow-up - 0.1`.
fn comparable_nodes(grid: &Grid, solutions: &[&Solution]) -> usize {
    let blow = solutions
        .iter()
        .filter_map(|s| s.blow_up_x())
        .fold(f64::INFINITY, f64::min);
    grid.nodes().take_while(|&x| x <= blow - 0.1).count()
}

fn check_against_oracle(p: &RiccatiProblem, particular: bool) {
    let (we, _) = solve_riccati_block_e(p, &cfg()).unwrap();
    let (wf, _) = solve_riccati_block_f(p, &cfg()).unwrap();
    let o = rk4_riccati(p, &OracleConfig::default()).unwrap().solution;
    let limit = comparable_nodes(&p.grid, &[&we, &wf, &o]);
    assert!(compare_until(&we, &o, limit).unwrap() <= 1e-6);
    assert!(compare_until(&wf, &o, limit).unwrap() <= 1e-6);
    if particular {
        let wp = riccati_from_particular(p, &cfg()).unwrap();
        assert!(compare_until(&wp, &o, limit).unwrap() <= 1e-6);
    }
}

#[test]
fn riccati_forms_match_the_oracle() {
    let mut r = rng(12);
    let shape = RiccatiShape {
        bounded_particular: true,
        ..RiccatiShape::default()
    };
    for _ in 0..8 {
        check_against_oracle(&random_riccati(&mut r, &shape, unit_grid(200)), true);
    }
}

fn escape_family(w0: f64, grid: Grid) -> RiccatiProblem {
    let d = (grid.x_lo(), grid.x_hi());
    let c = |s: &str| CoeffMatrix::parse(&[[s]], d).unwrap();
    RiccatiProblem::new(c("0"), c("0"), c("-1"), c("0"), Matrix::scalar(w0).unwrap(), grid).unwrap()
}

#[test]
fn escape_family_blow_up_is_consistent() {
    // W' = W², W(0) = w0 escapes at x = 1/w0.
    let grid = Grid::new(0.0, 2.0, 400).unwrap();
    for w0 in [0.6, 0.75, 1.0, 1.3, 1.9] {
        let p = escape_family(w0, grid);
        let (we, _) = solve_riccati_block_e(&p, &cfg()).unwrap();
        let (wf, _) = solve_riccati_block_f(&p, &cfg()).unwrap();
        let o = rk4_riccati(&p, &OracleConfig::default()).unwrap();
        let (ne, nf, no) = (
            we.meta.blow_up_node.unwrap() as i64,
            wf.meta.blow_up_node.unwrap() as i64,
            o.solution.meta.blow_up_node.unwrap() as i64,
        );
        assert!((ne - nf).abs() <= 1, "w0 {w0}: {ne} vs {nf}");
        assert!((ne - no).abs() <= 1, "w0 {w0}: {ne} vs oracle {no}");
        let escape = 1.0 / w0;
        assert!((we.blow_up_x().unwrap() - escape).abs() <= grid.h() + 1e-12, "w0 {w0}");
        check_against_oracle(&p, false);
    }
}

#[test]
fn bounded_escape_free_problem_has_no_blow_up() {
    // W' = -W², W(0) = 1: W = 1/(1+x), no escape for x >= 0.
    let grid = Grid::new(0.0, 3.0, 300).unwrap();
    let d = (0.0, 3.0);
    let c = |s: &str| CoeffMatrix::parse(&[[s]], d).unwrap();
    let p = RiccatiProblem::new(c("0"), c("0"), c("1"), c("0"), Matrix::scalar(1.0).unwrap(), grid).unwrap();
    let (we, _) = solve_riccati_block_e(&p, &cfg()).unwrap();
    assert_eq!(we.meta.blow_up_node, None);
    assert!((we.last().get(0, 0) - 0.25).abs() < 1e-9);
}
