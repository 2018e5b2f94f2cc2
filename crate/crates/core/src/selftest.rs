//! Built-in example corpus run by `ltvprop selftest`.

use crate::error::Result;
use crate::problem::ProblemFile;
use crate::solvers::Solution;
use crate::verify::verify;

/// A checked quantity: what was computed, what it should be, and how close
/// it must be.
struct Expectation {
    value: f64,
    expected: f64,
    tol: f64,
}

type Extract = fn(&Solution) -> Expectation;

pub struct Example {
    pub name: &'static str,
    pub json: &'static str,
    extract: Extract,
}

fn last(s: &Solution, row: usize, col: usize) -> f64 {
    s.last().get(row, col)
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "riccati_scalar",
        json: include_str!("../problems/riccati_scalar.json"),
        extract: |s| Expectation {
            value: last(s, 0, 0),
            expected: 0.5,
            tol: 1e-9,
        },
    },
    Example {
        name: "harmonic",
        json: include_str!("../problems/harmonic.json"),
        extract: |s| Expectation {
            value: last(s, 1, 0),
            expected: 1f64.cos(),
            tol: 1e-8,
        },
    },
    Example {
        name: "nilpotent",
        json: include_str!("../problems/nilpotent.json"),
        extract: |s| Expectation {
            value: last(s, 0, 1),
            expected: 1.0,
            tol: 1e-12,
        },
    },
    Example {
        name: "airy",
        json: include_str!("../problems/airy.json"),
        extract: |s| Expectation {
            value: s.last().det().unwrap_or(f64::NAN),
            expected: 1.0,
            tol: 1e-8,
        },
    },
    Example {
        name: "blow_up",
        json: include_str!("../problems/blow_up.json"),
        extract: |s| Expectation {
            value: s.blow_up_x().unwrap_or(f64::INFINITY),
            expected: 1.0,
            tol: s.grid.h() + 1e-12,
        },
    },
    Example {
        name: "tangent",
        json: include_str!("../problems/tangent.json"),
        extract: |s| Expectation {
            value: last(s, 0, 0),
            expected: -(1f64.tan()),
            tol: 1e-6,
        },
    },
    Example {
        name: "forced",
        json: include_str!("../problems/forced.json"),
        extract: |s| Expectation {
            value: last(s, 0, 0),
            expected: 1f64.exp() - 1.0,
            tol: 1e-9,
        },
    },
    Example {
        name: "sylvester",
        json: include_str!("../problems/sylvester.json"),
        extract: |s| Expectation {
            value: last(s, 0, 0),
            expected: 1.0 - (-1f64).exp(),
            tol: 1e-9,
        },
    },
    Example {
        name: "particular",
        json: include_str!("../problems/particular.json"),
        extract: |s| Expectation {
            value: last(s, 0, 0),
            expected: (1.0 + 0.5f64.atanh()).tanh(),
            tol: 1e-9,
        },
    },
];

/// Result of one selftest run. `files` holds `(file name, contents)` pairs
/// for every solution table and report produced.
pub struct Outcome {
    pub summary: String,
    pub passed: bool,
    pub files: Vec<(String, String)>,
}

pub fn run() -> Result<Outcome> {
    let mut summary = String::new();
    let mut passed = true;
    let mut files = Vec::new();
    for ex in EXAMPLES {
        let loaded = ProblemFile::from_json(ex.json)?.build()?;
        let solution = loaded.solve()?;
        let e = (ex.extract)(&solution);
        let diff = (e.value - e.expected).abs();
        let value_ok = diff <= e.tol;
        let report = verify(&loaded)?;
        let ok = value_ok && report.passed();
        passed &= ok;
        summary.push_str(&format!(
            "SELFTEST {} value={:.16e} expected={:.16e} diff={:.3e} tol={:.3e} verify={} {}\n",
            ex.name,
            e.value,
            e.expected,
            diff,
            e.tol,
            if report.passed() { "PASS" } else { "FAIL" },
            if ok { "PASS" } else { "FAIL" }
        ));
        files.push((format!("{}.csv", ex.name), crate::csv::format_solution(&solution)));
        files.push((format!("{}.report.txt", ex.name), report.to_string()));
    }
    summary.push_str(&format!("SELFTEST RESULT {}\n", if passed { "PASS" } else { "FAIL" }));
    Ok(Outcome { summary, passed, files })
}
