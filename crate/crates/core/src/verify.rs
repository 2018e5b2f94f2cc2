//! Invariant checks behind `ltvprop verify`.
//!
//! Each problem kind has a fixed list of invariants that must appear in its
//! report; a report missing any of them fails.

use std::fmt;

use crate::coeff::CoeffMatrix;
use crate::dense::Matrix;
use crate::error::Result;
use crate::oracle::{compare_until, rk4_linear, rk4_riccati, rk4_sylvester, OracleConfig};
use crate::problem::{Kind, LoadedProblem, Problem};
use crate::series::{
    cumulative_integral, propagate, propagator_residual, sample, Grid, Ordering, PropagatorTable, SeriesConfig,
};
use crate::solvers::{
    bilinear_residual, riccati_from_particular, solve_linear_ivp, solve_riccati_block_e, solve_riccati_block_f,
    solve_sylvester, RiccatiProblem, Solution,
};

/// Tolerances used by the report.
pub mod tol {
    /// Relative error of `det E[X]` against `exp(∫ tr X)`.
    pub const DET_IDENTITY: f64 = 1e-8;
    /// `F[X]·E[-X]` and `E[-X]·F[X]` against the identity.
    pub const INVERSE_IDENTITY: f64 = 1e-8;
    /// Centered-difference residual at spacing [`REFERENCE_SPACING`] or finer;
    /// limited by the O(h²) stencil.
    pub const DERIVATIVE_RESIDUAL: f64 = 1e-4;
    pub const REFERENCE_SPACING: f64 = 0.005;
    pub const FORM_EQUIVALENCE: f64 = 1e-8;
    pub const BILINEAR: f64 = 1e-8;
    pub const PARTICULAR: f64 = 1e-7;
    pub const ORACLE: f64 = 1e-6;
    /// Blow-up locations may differ by this many grid intervals.
    pub const BLOW_UP_NODES: f64 = 1.0;
    /// Comparisons stop this far before the first blow-up.
    pub const BLOW_UP_MARGIN: f64 = 0.1;

    /// Derivative-residual tolerance for spacing `h`, growing as `h²` on
    /// grids coarser than the reference.
    pub fn derivative(h: f64) -> f64 {
        DERIVATIVE_RESIDUAL * (h / REFERENCE_SPACING).powi(2).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            residual,
            tol,
            pass: residual <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: Kind,
    /// Solver metadata, printed as comment lines.
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Required invariants absent from this report.
    pub fn missing(&self, required: &[String]) -> Vec<String> {
        required
            .iter()
            .filter(|r| !self.checks.iter().any(|c| &c.name == *r))
            .cloned()
            .collect()
    }

    /// Adds a failing entry for every required invariant that is absent.
    pub fn enforce(&mut self, required: &[String]) {
        for name in self.missing(required) {
            self.checks.push(Check {
                name: format!("{name}.missing"),
                residual: f64::INFINITY,
                tol: 0.0,
                pass: false,
            });
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# kind = {}", self.kind.name())?;
        for n in &self.notes {
            writeln!(f, "# {n}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "INVARIANT {} residual={:.6e} tol={:.6e} {}",
                c.name,
                c.residual,
                c.tol,
                if c.pass { "PASS" } else { "FAIL" }
            )?;
        }
        writeln!(f, "RESULT {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

const PROPAGATOR_SUITE: [&str; 9] = [
    "base_identity",
    "det_identity_E",
    "det_identity_F",
    "inverse_identity_FE",
    "inverse_identity_EF",
    "derivative_residual_E",
    "derivative_residual_F",
    "truncation_honesty_E",
    "truncation_honesty_F",
];

fn suite(prefix: &str) -> impl Iterator<Item = String> + '_ {
    PROPAGATOR_SUITE.iter().map(move |n| format!("{prefix}{n}"))
}

/// Every invariant a report for `kind` must contain.
pub fn required_invariants(kind: Kind, oracle: bool) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    match kind {
        Kind::Propagator => names.extend(suite("")),
        Kind::Linear | Kind::NthOrder => {
            names.extend(suite("A."));
            names.extend(["base_value", "linear_residual"].map(String::from));
        }
        Kind::Sylvester => {
            names.extend(suite("A."));
            names.extend(suite("B."));
            names.extend(["base_value", "sylvester_residual"].map(String::from));
        }
        Kind::Riccati | Kind::RiccatiParticular | Kind::ScalarRiccati => {
            names.extend(suite("block."));
            names.extend(
                [
                    "base_value",
                    "riccati_residual",
                    "form_equivalence",
                    "bilinear_invariant",
                    "blow_up_consistency",
                ]
                .map(String::from),
            );
            if kind == Kind::RiccatiParticular {
                names.push("particular_agreement".into());
            }
            if oracle {
                names.push("oracle_blow_up".into());
            }
        }
    }
    if oracle {
        names.push("oracle_agreement".into());
    }
    names
}

pub fn verify(loaded: &LoadedProblem) -> Result<Report> {
    verify_with(loaded, &OracleConfig::default())
}

pub fn verify_with(loaded: &LoadedProblem, oracle_cfg: &OracleConfig) -> Result<Report> {
    let cfg = &loaded.series;
    let kind = loaded.problem.kind();
    let grid = loaded.problem.grid();
    let mut report = Report {
        kind,
        notes: vec![format!(
            "grid = {} intervals on [{}, {}]",
            grid.n_intervals(),
            grid.x_lo(),
            grid.x_hi()
        )],
        checks: Vec::new(),
    };

    match &loaded.problem {
        Problem::Propagator { x, grid } => {
            propagator_suite(&mut report, "", &sample(x, grid)?, grid, cfg)?;
        }
        Problem::Linear(p) | Problem::NthOrder(p) => {
            propagator_suite(&mut report, "A.", &sample(&p.a, &p.grid)?, &p.grid, cfg)?;
            let s = solve_linear_ivp(p, cfg)?;
            note_solution(&mut report, &s);
            report
                .checks
                .push(Check::new("base_value", s.values[0].max_abs_diff(&p.c)?, 0.0));
            report.checks.push(Check::new(
                "linear_residual",
                s.meta.max_residual.unwrap_or(f64::INFINITY),
                tol::derivative(grid.h()),
            ));
            if loaded.oracle {
                let o = rk4_linear(p, oracle_cfg)?;
                report.checks.push(Check::new(
                    "oracle_agreement",
                    compare_until(&s, &o, usize::MAX)?,
                    tol::ORACLE,
                ));
            }
        }
        Problem::Sylvester(p) => {
            propagator_suite(&mut report, "A.", &sample(&p.a, &p.grid)?, &p.grid, cfg)?;
            propagator_suite(&mut report, "B.", &sample(&p.b, &p.grid)?, &p.grid, cfg)?;
            let s = solve_sylvester(p, cfg)?;
            note_solution(&mut report, &s);
            report
                .checks
                .push(Check::new("base_value", s.values[0].max_abs_diff(&p.u0)?, 0.0));
            report.checks.push(Check::new(
                "sylvester_residual",
                s.meta.max_residual.unwrap_or(f64::INFINITY),
                tol::derivative(grid.h()),
            ));
            if loaded.oracle {
                let o = rk4_sylvester(p, oracle_cfg)?;
                report.checks.push(Check::new(
                    "oracle_agreement",
                    compare_until(&s, &o, usize::MAX)?,
                    tol::ORACLE,
                ));
            }
        }
        Problem::Riccati(p) | Problem::RiccatiParticular(p) | Problem::ScalarRiccati(p) => {
            riccati_suite(
                &mut report,
                p,
                cfg,
                kind == Kind::RiccatiParticular,
                loaded.oracle.then_some(oracle_cfg),
            )?;
        }
    }

    report.enforce(&required_invariants(kind, loaded.oracle));
    Ok(report)
}

fn note_solution(report: &mut Report, s: &Solution) {
    for p in &s.meta.propagators {
        report.notes.push(format!(
            "propagator {} terms_used = {} last_term_norm = {:.6e} tail_bound = {:.6e}",
            p.label, p.terms_used, p.last_term_norm, p.tail_bound
        ));
    }
    match s.blow_up_x() {
        Some(x) => report.notes.push(format!("blow_up_x = {x:.16e}")),
        None => report.notes.push("blow_up_x = none".into()),
    }
}

/// Base point, determinant, inverse, derivative, and truncation checks for
/// one generator.
fn propagator_suite(report: &mut Report, prefix: &str, x: &[Matrix], grid: &Grid, cfg: &SeriesConfig) -> Result<()> {
    let n = x[0].rows();
    let e = propagate(Ordering::Left, x, grid, cfg)?;
    let f = propagate(Ordering::Right, x, grid, cfg)?;
    let neg: Vec<Matrix> = x.iter().map(Matrix::neg).collect();
    let e_neg = propagate(Ordering::Left, &neg, grid, cfg)?;

    for t in [&e, &f, &e_neg] {
        report.notes.push(format!(
            "propagator {}[{}X] terms_used = {} last_term_norm = {:.6e} tail_bound = {:.6e}",
            t.kind.label(),
            if std::ptr::eq(t, &e_neg) { "-" } else { "" },
            t.terms_used,
            t.last_term_norm,
            t.tail_bound
        ));
    }

    let id = Matrix::identity(n);
    let base = e.values[0].max_abs_diff(&id)?.max(f.values[0].max_abs_diff(&id)?);
    report
        .checks
        .push(Check::new(format!("{prefix}base_identity"), base, 0.0));

    let traces = x
        .iter()
        .map(|m| Matrix::scalar(m.trace()?))
        .collect::<Result<Vec<_>>>()?;
    let int_trace = cumulative_integral(&traces, grid)?;
    for t in [&e, &f] {
        let mut worst = 0.0f64;
        for (v, it) in t.values.iter().zip(&int_trace) {
            let expected = it.get(0, 0).exp();
            worst = worst.max((v.det()? - expected).abs() / expected);
        }
        report.checks.push(Check::new(
            format!("{prefix}det_identity_{}", t.kind.label()),
            worst,
            tol::DET_IDENTITY,
        ));
    }

    let (mut fe, mut ef) = (0.0f64, 0.0f64);
    for (fv, ev) in f.values.iter().zip(&e_neg.values) {
        fe = fe.max(fv.mul(ev)?.max_abs_diff(&id)?);
        ef = ef.max(ev.mul(fv)?.max_abs_diff(&id)?);
    }
    report.checks.push(Check::new(
        format!("{prefix}inverse_identity_FE"),
        fe,
        tol::INVERSE_IDENTITY,
    ));
    report.checks.push(Check::new(
        format!("{prefix}inverse_identity_EF"),
        ef,
        tol::INVERSE_IDENTITY,
    ));

    for t in [&e, &f] {
        report.checks.push(Check::new(
            format!("{prefix}derivative_residual_{}", t.kind.label()),
            propagator_residual(t, x, grid)?,
            tol::derivative(grid.h()),
        ));
    }
    for t in [&e, &f] {
        report.checks.push(truncation_check(prefix, t));
    }
    Ok(())
}

fn truncation_check(prefix: &str, t: &PropagatorTable) -> Check {
    Check::new(
        format!("{prefix}truncation_honesty_{}", t.kind.label()),
        t.last_term_norm,
        t.tail_bound,
    )
}

fn riccati_suite(
    report: &mut Report,
    p: &RiccatiProblem,
    cfg: &SeriesConfig,
    particular: bool,
    oracle: Option<&OracleConfig>,
) -> Result<()> {
    let grid = p.grid;
    let block = block_generator(p)?;
    propagator_suite(report, "block.", &block, &grid, cfg)?;

    let (sol_e, left) = solve_riccati_block_e(p, cfg)?;
    let (sol_f, right) = solve_riccati_block_f(p, cfg)?;
    note_solution(report, &sol_e);
    let oracle_run = oracle.map(|o| rk4_riccati(p, o)).transpose()?;

    // Nodes beyond the first blow-up minus a margin are excluded from
    // value comparisons.
    let first_blow_up = [
        sol_e.blow_up_x(),
        sol_f.blow_up_x(),
        oracle_run.as_ref().and_then(|o| o.solution.blow_up_x()),
    ]
    .into_iter()
    .flatten()
    .fold(f64::INFINITY, f64::min);
    let limit = grid
        .nodes()
        .take_while(|&x| x <= first_blow_up - tol::BLOW_UP_MARGIN)
        .count();

    let base = sol_e.values[0]
        .max_abs_diff(&p.w0)?
        .max(sol_f.values[0].max_abs_diff(&p.w0)?);
    report.checks.push(Check::new("base_value", base, 0.0));

    report.checks.push(Check::new(
        "riccati_residual",
        scaled_riccati_residual(p, &sol_e, limit)?,
        tol::derivative(grid.h()),
    ));
    report.checks.push(Check::new(
        "form_equivalence",
        scaled_difference(&sol_e, &sol_f, limit)?,
        tol::FORM_EQUIVALENCE,
    ));

    let mut bilinear_scale = 1.0f64;
    for i in 0..left.w1.len() {
        let s = right.u2[i].norm_max() * left.w1[i].norm_max() + right.u1[i].norm_max() * left.w2[i].norm_max();
        bilinear_scale = bilinear_scale.max(s);
    }
    report.checks.push(Check::new(
        "bilinear_invariant",
        bilinear_residual(&left, &right)? / bilinear_scale,
        tol::BILINEAR,
    ));

    let node_or_end = |s: &Solution| s.meta.blow_up_node.unwrap_or(grid.len()) as f64;
    report.checks.push(Check::new(
        "blow_up_consistency",
        (node_or_end(&sol_e) - node_or_end(&sol_f)).abs(),
        tol::BLOW_UP_NODES,
    ));

    if particular {
        let w = riccati_from_particular(p, cfg)?;
        report.checks.push(Check::new(
            "particular_agreement",
            scaled_difference(&sol_e, &w, limit)?,
            tol::PARTICULAR,
        ));
    }

    if let Some(o) = oracle_run {
        report.checks.push(Check::new(
            "oracle_agreement",
            compare_until(&sol_e, &o.solution, limit)?,
            tol::ORACLE,
        ));
        report.checks.push(Check::new(
            "oracle_blow_up",
            (node_or_end(&sol_e) - node_or_end(&o.solution)).abs(),
            tol::BLOW_UP_NODES,
        ));
    }
    Ok(())
}

/// `[[A, Q], [P, B]]` at every node.
pub fn block_generator(p: &RiccatiProblem) -> Result<Vec<Matrix>> {
    let s = |c: &CoeffMatrix| sample(c, &p.grid);
    let (a, b, pm, q) = (s(&p.a)?, s(&p.b)?, s(&p.p)?, s(&p.q)?);
    (0..p.grid.len())
        .map(|i| Matrix::from_blocks(&[&[&a[i], &q[i]], &[&pm[i], &b[i]]]))
        .collect()
}

/// Node-wise difference divided by `max(1, ‖W‖)²`: near an escape the
/// denominator is small and rounding in it is amplified by `‖W‖²`.
fn scaled_difference(a: &Solution, b: &Solution, limit: usize) -> Result<f64> {
    let common = a.values.len().min(b.values.len()).min(limit);
    let mut worst = 0.0f64;
    for i in 0..common {
        let scale = a.values[i].norm_max().max(1.0).powi(2);
        worst = worst.max(a.values[i].max_abs_diff(&b.values[i])? / scale);
    }
    Ok(worst)
}

/// Centered-difference residual of the Riccati equation, divided by
/// `max(1, ‖W‖)⁴`, which is how the third derivative of a fractional-linear
/// solution grows.
fn scaled_riccati_residual(p: &RiccatiProblem, s: &Solution, limit: usize) -> Result<f64> {
    let grid = &p.grid;
    let h = grid.h();
    let w = &s.values;
    let last = w.len().min(limit);
    let mut worst = 0.0f64;
    for i in 1..last.saturating_sub(1) {
        let x = grid.node(i);
        let (a, b, pm, q) = (p.a.eval(x)?, p.b.eval(x)?, p.p.eval(x)?, p.q.eval(x)?);
        let rhs = a
            .mul(&w[i])?
            .add(&q)?
            .sub(&w[i].mul(&pm)?.mul(&w[i])?)?
            .sub(&w[i].mul(&b)?)?;
        let deriv = w[i + 1].sub(&w[i - 1])?.scale(0.5 / h)?;
        let scale = w[i].norm_max().max(1.0).powi(4);
        worst = worst.max(deriv.max_abs_diff(&rhs)? / scale);
    }
    Ok(worst)
}
