//! JSON problem files.
//!
//! ```json
//! {
//!   "kind": "riccati",
//!   "dimensions": { "n": 1, "m": 1 },
//!   "coefficients": { "A": [["0"]], "B": [["0"]], "P": [["1"]], "Q": [["0"]] },
//!   "initial": [[1.0]],
//!   "interval": [0.0, 1.0],
//!   "n_intervals": 200
//! }
//! ```
//!
//! Which coefficients and which initial value a file must carry depends on
//! `kind`; anything a kind does not use is rejected, as are unknown fields.

use serde::{Deserialize, Serialize};

use crate::coeff::CoeffMatrix;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::series::{propagate, sample, Grid, Ordering, PropagatorTable, SeriesConfig};
use crate::solvers::{
    companion_from_scalar, riccati_from_particular, scalar_riccati_problem, solve_linear_ivp, solve_riccati_block_e,
    solve_sylvester, LinearIvp, PropagatorSummary, RiccatiProblem, Solution, SolutionMeta, SylvesterIvp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Propagator,
    Linear,
    NthOrder,
    Sylvester,
    Riccati,
    RiccatiParticular,
    ScalarRiccati,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Propagator => "propagator",
            Kind::Linear => "linear",
            Kind::NthOrder => "nth-order",
            Kind::Sylvester => "sylvester",
            Kind::Riccati => "riccati",
            Kind::RiccatiParticular => "riccati-particular",
            Kind::ScalarRiccati => "scalar-riccati",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

/// A single expression or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprList {
    One(String),
    Many(Vec<String>),
}

type ExprGrid = Vec<Vec<String>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<ExprGrid>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a_mat: Option<ExprGrid>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b_mat: Option<ExprGrid>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p_mat: Option<ExprGrid>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q_mat: Option<ExprGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ExprGrid>,
    /// `a₁..aₙ` of an n-th order equation, or `a` of a scalar Riccati one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<ExprList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
}

impl Coefficients {
    fn present(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut note = |set: bool, name| {
            if set {
                names.push(name)
            }
        };
        note(self.x.is_some(), "X");
        note(self.a_mat.is_some(), "A");
        note(self.b_mat.is_some(), "B");
        note(self.p_mat.is_some(), "P");
        note(self.q_mat.is_some(), "Q");
        note(self.forcing.is_some(), "forcing");
        note(self.a.is_some(), "a");
        note(self.b.is_some(), "b");
        note(self.c.is_some(), "c");
        note(self.f.is_some(), "f");
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    pub dimensions: Dimensions,
    pub coefficients: Coefficients,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
    pub interval: [f64; 2],
    pub n_intervals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesOverrides>,
    #[serde(default)]
    pub oracle: bool,
}

/// A validated problem ready to solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Propagator { x: CoeffMatrix, grid: Grid },
    Linear(LinearIvp),
    NthOrder(LinearIvp),
    Sylvester(SylvesterIvp),
    Riccati(RiccatiProblem),
    RiccatiParticular(RiccatiProblem),
    ScalarRiccati(RiccatiProblem),
}

impl Problem {
    pub fn kind(&self) -> Kind {
        match self {
            Problem::Propagator { .. } => Kind::Propagator,
            Problem::Linear(_) => Kind::Linear,
            Problem::NthOrder(_) => Kind::NthOrder,
            Problem::Sylvester(_) => Kind::Sylvester,
            Problem::Riccati(_) => Kind::Riccati,
            Problem::RiccatiParticular(_) => Kind::RiccatiParticular,
            Problem::ScalarRiccati(_) => Kind::ScalarRiccati,
        }
    }

    pub fn grid(&self) -> Grid {
        match self {
            Problem::Propagator { grid, .. } => *grid,
            Problem::Linear(p) | Problem::NthOrder(p) => p.grid,
            Problem::Sylvester(p) => p.grid,
            Problem::Riccati(p) | Problem::RiccatiParticular(p) | Problem::ScalarRiccati(p) => p.grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub series: SeriesConfig,
    pub oracle: bool,
}

impl LoadedProblem {
    /// Solves with the method the kind names. A propagator problem yields
    /// `E[X]`; the Riccati kinds use the block E-form, except
    /// `riccati-particular`, which goes through the particular solution.
    pub fn solve(&self) -> Result<Solution> {
        let cfg = &self.series;
        match &self.problem {
            Problem::Propagator { x, grid } => {
                let e = propagate(Ordering::Left, &sample(x, grid)?, grid, cfg)?;
                Ok(Solution {
                    grid: *grid,
                    meta: SolutionMeta {
                        propagators: vec![PropagatorSummary::of("E[X]", &e)],
                        ..SolutionMeta::default()
                    },
                    values: e.values,
                })
            }
            Problem::Linear(p) | Problem::NthOrder(p) => solve_linear_ivp(p, cfg),
            Problem::Sylvester(p) => solve_sylvester(p, cfg),
            Problem::Riccati(p) | Problem::ScalarRiccati(p) => Ok(solve_riccati_block_e(p, cfg)?.0),
            Problem::RiccatiParticular(p) => riccati_from_particular(p, cfg),
        }
    }

    /// `E[X]` and `F[X]` of a propagator problem.
    pub fn propagators(&self) -> Result<(PropagatorTable, PropagatorTable)> {
        match &self.problem {
            Problem::Propagator { x, grid } => {
                let samples = sample(x, grid)?;
                Ok((
                    propagate(Ordering::Left, &samples, grid, &self.series)?,
                    propagate(Ordering::Right, &samples, grid, &self.series)?,
                ))
            }
            other => Err(Error::Problem(format!(
                "propagator tables need kind propagator, got {}",
                other.kind().name()
            ))),
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<ProblemFile> {
        serde_json::from_str(text).map_err(|e| Error::Problem(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn series_config(&self) -> Result<SeriesConfig> {
        let mut cfg = SeriesConfig::default();
        if let Some(o) = self.series {
            if let Some(k) = o.max_terms {
                cfg.max_terms = k;
            }
            if let Some(t) = o.term_tol {
                cfg.term_tol = t;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every shape against `kind` and `dimensions`, parses every
    /// expression, and builds the solver-level problem.
    pub fn build(&self) -> Result<LoadedProblem> {
        let [lo, hi] = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::Problem(format!(
                "interval must satisfy 0 <= x_lo < x_hi, got [{lo}, {hi}]"
            )));
        }
        let grid = Grid::new(lo, hi, self.n_intervals)?;
        let series = self.series_config()?;
        self.check_fields()?;

        let n = self.dimensions.n;
        if n == 0 {
            return Err(Error::Problem("dimensions.n must be positive".into()));
        }
        let m = match (self.kind, self.dimensions.m) {
            (Kind::Sylvester | Kind::Riccati | Kind::RiccatiParticular, Some(0)) => {
                return Err(Error::Problem("dimensions.m must be positive".into()))
            }
            (Kind::Sylvester | Kind::Riccati | Kind::RiccatiParticular, Some(m)) => m,
            (Kind::Sylvester | Kind::Riccati | Kind::RiccatiParticular, None) => {
                return Err(Error::Problem(format!("kind {} needs dimensions.m", self.kind.name())))
            }
            (_, Some(_)) => {
                return Err(Error::Problem(format!(
                    "kind {} takes no dimensions.m",
                    self.kind.name()
                )))
            }
            (_, None) => 1,
        };
        if self.kind == Kind::ScalarRiccati && n != 1 {
            return Err(Error::Problem("scalar-riccati needs dimensions.n = 1".into()));
        }

        let domain = (lo, hi);
        let coeff = |name: &str, g: &Option<ExprGrid>, shape: (usize, usize)| -> Result<CoeffMatrix> {
            let g = g.as_ref().expect("presence checked");
            check_grid_shape(name, g.len(), g.iter().map(Vec::len), shape)?;
            CoeffMatrix::parse(g, domain).map_err(|e| located(name, e))
        };
        let initial = |shape: (usize, usize)| -> Result<Matrix> {
            let rows = self.initial.as_ref().expect("presence checked");
            check_grid_shape("initial", rows.len(), rows.iter().map(Vec::len), shape)?;
            Matrix::from_rows(rows).map_err(|e| Error::Problem(format!("initial: {e}")))
        };
        let c = &self.coefficients;

        let problem = match self.kind {
            Kind::Propagator => Problem::Propagator {
                x: coeff("X", &c.x, (n, n))?,
                grid,
            },
            Kind::Linear => {
                let a = coeff("A", &c.a_mat, (n, n))?;
                let forcing = match &c.forcing {
                    Some(_) => coeff("forcing", &c.forcing, (n, 1))?,
                    None => CoeffMatrix::zeros(n, 1, domain)?,
                };
                Problem::Linear(LinearIvp::new(a, forcing, initial((n, 1))?, grid)?)
            }
            Kind::NthOrder => {
                let list = match c.a.as_ref().expect("presence checked") {
                    ExprList::Many(v) => v.clone(),
                    ExprList::One(s) => vec![s.clone()],
                };
                if list.len() != n {
                    return Err(Error::Problem(format!(
                        "coefficients.a: expected {n} expressions, got {}",
                        list.len()
                    )));
                }
                let a = list
                    .iter()
                    .map(|s| expr::parse(s).map_err(|e| located("a", e)))
                    .collect::<Result<Vec<_>>>()?;
                let f = optional_expr("f", &c.f)?;
                let u0 = initial((n, 1))?;
                let u0: Vec<f64> = u0.as_slice().to_vec();
                Problem::NthOrder(companion_from_scalar(&a, &f, &u0, grid)?)
            }
            Kind::Sylvester => Problem::Sylvester(SylvesterIvp::new(
                coeff("A", &c.a_mat, (n, n))?,
                coeff("B", &c.b_mat, (m, m))?,
                coeff("P", &c.p_mat, (n, m))?,
                initial((n, m))?,
                grid,
            )?),
            Kind::Riccati | Kind::RiccatiParticular => {
                let p = RiccatiProblem::new(
                    coeff("A", &c.a_mat, (n, n))?,
                    coeff("B", &c.b_mat, (m, m))?,
                    coeff("P", &c.p_mat, (m, n))?,
                    coeff("Q", &c.q_mat, (n, m))?,
                    initial((n, m))?,
                    grid,
                )?;
                if self.kind == Kind::Riccati {
                    Problem::Riccati(p)
                } else {
                    Problem::RiccatiParticular(p)
                }
            }
            Kind::ScalarRiccati => {
                let a = match c.a.as_ref().expect("presence checked") {
                    ExprList::One(s) => expr::parse(s).map_err(|e| located("a", e))?,
                    ExprList::Many(_) => {
                        return Err(Error::Problem("coefficients.a must be a single expression".into()))
                    }
                };
                let b = optional_expr("b", &c.b)?;
                let cc = optional_expr("c", &c.c)?;
                let y0 = initial((1, 1))?.get(0, 0);
                Problem::ScalarRiccati(scalar_riccati_problem(&a, &b, &cc, y0, grid)?)
            }
        };
        Ok(LoadedProblem {
            problem,
            series,
            oracle: self.oracle,
        })
    }

    fn check_fields(&self) -> Result<()> {
        let (required, optional): (&[&str], &[&str]) = match self.kind {
            Kind::Propagator => (&["X"], &[]),
            Kind::Linear => (&["A"], &["forcing"]),
            Kind::NthOrder => (&["a"], &["f"]),
            Kind::Sylvester => (&["A", "B", "P"], &[]),
            Kind::Riccati | Kind::RiccatiParticular => (&["A", "B", "P", "Q"], &[]),
            Kind::ScalarRiccati => (&["a"], &["b", "c"]),
        };
        let present = self.coefficients.present();
        for name in required {
            if !present.contains(name) {
                return Err(Error::Problem(format!(
                    "kind {} needs coefficients.{name}",
                    self.kind.name()
                )));
            }
        }
        for name in &present {
            if !required.contains(name) && !optional.contains(name) {
                return Err(Error::Problem(format!(
                    "kind {} does not use coefficients.{name}",
                    self.kind.name()
                )));
            }
        }
        let wants_initial = self.kind != Kind::Propagator;
        match (wants_initial, self.initial.is_some()) {
            (true, false) => Err(Error::Problem(format!("kind {} needs initial", self.kind.name()))),
            (false, true) => Err(Error::Problem("kind propagator takes no initial".into())),
            _ => Ok(()),
        }
    }
}

fn optional_expr(name: &str, text: &Option<String>) -> Result<Expr> {
    match text {
        Some(s) => expr::parse(s).map_err(|e| located(name, e)),
        None => Ok(Expr::Num(0.0)),
    }
}

fn located(name: &str, e: Error) -> Error {
    match e {
        Error::Syntax { .. } => Error::Problem(format!("coefficients.{name}: {e}")),
        other => other,
    }
}

fn check_grid_shape(
    name: &str,
    rows: usize,
    mut row_lens: impl Iterator<Item = usize>,
    want: (usize, usize),
) -> Result<()> {
    if rows != want.0 || row_lens.any(|l| l != want.1) {
        return Err(Error::Problem(format!("{name} must be {}x{}", want.0, want.1)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const RICCATI: &str = r#"{
        "kind": "riccati",
        "dimensions": {"n": 1, "m": 1},
        "coefficients": {"A": [["0"]], "B": [["0"]], "P": [["1"]], "Q": [["0"]]},
        "initial": [[1.0]],
        "interval": [0.0, 1.0],
        "n_intervals": 200
    }"#;

    #[test]
    fn parses_and_builds() {
        let f = ProblemFile::from_json(RICCATI).unwrap();
        let loaded = f.build().unwrap();
        assert_eq!(loaded.problem.kind(), Kind::Riccati);
        assert_eq!(loaded.problem.grid().n_intervals(), 200);
        assert_eq!(loaded.series, SeriesConfig::default());
        assert!(!loaded.oracle);
        assert_eq!(ProblemFile::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = RICCATI.replace("\"n_intervals\"", "\"bogus\": 1, \"n_intervals\"");
        assert!(matches!(ProblemFile::from_json(&bad), Err(Error::Problem(_))));
        let bad = RICCATI.replace("\"Q\"", "\"R\"");
        assert!(ProblemFile::from_json(&bad).is_err());
    }

    #[test]
    fn fields_the_kind_does_not_use_are_rejected() {
        let bad = RICCATI.replace("\"Q\": [[\"0\"]]", "\"Q\": [[\"0\"]], \"X\": [[\"0\"]]");
        let err = ProblemFile::from_json(&bad).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("does not use coefficients.X"), "{err}");
        let missing = RICCATI.replace(", \"Q\": [[\"0\"]]", "");
        assert!(ProblemFile::from_json(&missing).unwrap().build().is_err());
    }

    #[test]
    fn shapes_are_checked_before_computation() {
        let bad = RICCATI.replace("\"P\": [[\"1\"]]", "\"P\": [[\"1\", \"2\"]]");
        let err = ProblemFile::from_json(&bad).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("P must be 1x1"), "{err}");
        let bad = RICCATI.replace("\"n_intervals\": 200", "\"n_intervals\": 201");
        assert!(matches!(
            ProblemFile::from_json(&bad).unwrap().build(),
            Err(Error::InvalidGrid(_))
        ));
        let bad = RICCATI.replace("[0.0, 1.0]", "[-1.0, 1.0]");
        assert!(ProblemFile::from_json(&bad).unwrap().build().is_err());
    }

    #[test]
    fn malformed_expression_is_a_usage_error() {
        let bad = RICCATI.replace("\"P\": [[\"1\"]]", "\"P\": [[\"sin(x\"]]");
        let err = ProblemFile::from_json(&bad).unwrap().build().unwrap_err();
        assert!(err.is_usage());
        assert!(err.to_string().contains("byte 5"), "{err}");
    }

    #[test]
    fn nth_order_and_scalar_riccati() {
        let nth = r#"{
            "kind": "nth-order", "dimensions": {"n": 2},
            "coefficients": {"a": ["0", "1"]},
            "initial": [[0.0], [1.0]], "interval": [0, 1], "n_intervals": 10
        }"#;
        let p = ProblemFile::from_json(nth).unwrap().build().unwrap();
        match p.problem {
            Problem::NthOrder(ivp) => assert_eq!(ivp.a.eval(0.0).unwrap().get(0, 1), -1.0),
            other => panic!("unexpected {other:?}"),
        }
        let sr = r#"{
            "kind": "scalar-riccati", "dimensions": {"n": 1},
            "coefficients": {"a": "1", "c": "1"},
            "initial": [[0.0]], "interval": [0, 1], "n_intervals": 10,
            "series": {"max_terms": 60}, "oracle": true
        }"#;
        let p = ProblemFile::from_json(sr).unwrap().build().unwrap();
        assert_eq!(p.series.max_terms, 60);
        assert!(p.oracle);
        match p.problem {
            Problem::ScalarRiccati(r) => assert_eq!(r.q.eval(0.5).unwrap().get(0, 0), -1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_m_rules() {
        let prop = r#"{"kind": "propagator", "dimensions": {"n": 1, "m": 1},
            "coefficients": {"X": [["x"]]}, "interval": [0, 1], "n_intervals": 2}"#;
        assert!(ProblemFile::from_json(prop).unwrap().build().is_err());
        let syl = r#"{"kind": "sylvester", "dimensions": {"n": 1},
            "coefficients": {"A": [["0"]], "B": [["0"]], "P": [["x"]]},
            "initial": [[0]], "interval": [0, 1], "n_intervals": 2}"#;
        assert!(ProblemFile::from_json(syl).unwrap().build().is_err());
    }
}
