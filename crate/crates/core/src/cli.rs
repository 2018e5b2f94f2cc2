//! `ltvprop` command line.
//!
//! Exit status: 0 success, 1 usage error, 2 solver error, 3 verification
//! failure. Diagnostics go to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::csv::{format_propagators, format_solution, write_atomic};
use crate::error::{Error, Result};
use crate::oracle::{compare, rk4_linear, rk4_riccati, rk4_sylvester, OracleConfig};
use crate::problem::{LoadedProblem, Problem, ProblemFile};
use crate::{selftest, verify};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ltvprop",
    version,
    about = "Propagators, linear and Riccati solvers for x-dependent matrix ODEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write its per-node solution as CSV.
    Solve(ProblemArgs),
    /// Write the E and F tables of a propagator problem as CSV.
    Propagator(ProblemArgs),
    /// Run the invariant suite and write a report.
    Verify(ProblemArgs),
    /// Run the built-in example corpus.
    Selftest {
        /// Directory receiving every solution table and report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ProblemArgs {
    file: PathBuf,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `n_intervals`.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Override the series term cap.
    #[arg(long, value_name = "K")]
    max_terms: Option<usize>,
    /// Override the series term tolerance.
    #[arg(long, value_name = "T")]
    tol: Option<f64>,
    /// Also run the RK4 reference integrator.
    #[arg(long)]
    oracle: bool,
}

impl ProblemArgs {
    fn load(&self) -> Result<LoadedProblem> {
        let text = fs::read_to_string(&self.file).map_err(|e| Error::Io {
            path: self.file.display().to_string(),
            message: e.to_string(),
        })?;
        let mut file = ProblemFile::from_json(&text)?;
        if let Some(n) = self.grid {
            file.n_intervals = n;
        }
        if self.max_terms.is_some() || self.tol.is_some() {
            let mut s = file.series.unwrap_or_default();
            s.max_terms = self.max_terms.or(s.max_terms);
            s.term_tol = self.tol.or(s.term_tol);
            file.series = Some(s);
        }
        file.oracle |= self.oracle;
        file.build()
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Propagator(a) => propagator(&a),
        Command::Verify(a) => verify_cmd(&a),
        Command::Selftest { out } => selftest_cmd(out.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ltvprop: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_SOLVER
            }
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            })
        }
    }
}

fn solve(a: &ProblemArgs) -> Result<i32> {
    let loaded = a.load()?;
    let solution = loaded.solve()?;
    if let Some(x) = solution.blow_up_x() {
        eprintln!("ltvprop: solution blows up near x = {x}");
    }
    if loaded.oracle {
        let cfg = OracleConfig::default();
        let reference = match &loaded.problem {
            Problem::Propagator { .. } => None,
            Problem::Linear(p) | Problem::NthOrder(p) => Some(rk4_linear(p, &cfg)?),
            Problem::Sylvester(p) => Some(rk4_sylvester(p, &cfg)?),
            Problem::Riccati(p) | Problem::RiccatiParticular(p) | Problem::ScalarRiccati(p) => {
                Some(rk4_riccati(p, &cfg)?.solution)
            }
        };
        if let Some(r) = reference {
            eprintln!(
                "ltvprop: max difference from RK4 reference = {:.3e}",
                compare(&solution, &r)?
            );
        }
    }
    emit(a.out.as_deref(), &format_solution(&solution))?;
    Ok(EXIT_OK)
}

fn propagator(a: &ProblemArgs) -> Result<i32> {
    let loaded = a.load()?;
    let (e, f) = loaded.propagators()?;
    let grid = loaded.problem.grid();
    emit(a.out.as_deref(), &format_propagators(&e, &f, grid.nodes()))?;
    Ok(EXIT_OK)
}

fn verify_cmd(a: &ProblemArgs) -> Result<i32> {
    let loaded = a.load()?;
    let start = Instant::now();
    let report = verify::verify(&loaded)?;
    // Timing stays off the report so output files are reproducible.
    eprintln!("ltvprop: verify took {:.3} s", start.elapsed().as_secs_f64());
    emit(a.out.as_deref(), &report.to_string())?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFY })
}

fn selftest_cmd(out: Option<&Path>) -> Result<i32> {
    let start = Instant::now();
    let outcome = selftest::run()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        for (name, contents) in &outcome.files {
            write_atomic(&dir.join(name), contents)?;
        }
        write_atomic(&dir.join("summary.txt"), &outcome.summary)?;
    }
    emit(None, &outcome.summary)?;
    eprintln!("ltvprop: selftest took {:.3} s", start.elapsed().as_secs_f64());
    Ok(if outcome.passed { EXIT_OK } else { EXIT_VERIFY })
}
