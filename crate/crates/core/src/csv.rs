//! Solution tables as CSV.
//!
//! One header line (`x,v_1_1,v_1_2,...`, entries in row-major order), one
//! line per grid node, every number with 17 significant digits so the text
//! round-trips to the same `f64`. A solution cut short by blow-up ends with
//! a `# blow_up_x = <x>` comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::PropagatorTable;
use crate::solvers::Solution;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn entry_headers(prefix: &str, rows: usize, cols: usize) -> impl Iterator<Item = String> + '_ {
    (1..=rows).flat_map(move |r| (1..=cols).map(move |c| format!("{prefix}_{r}_{c}")))
}

pub fn format_solution(s: &Solution) -> String {
    let (rows, cols) = s.values[0].shape();
    let mut out = String::from("x");
    for h in entry_headers("v", rows, cols) {
        out.push(',');
        out.push_str(&h);
    }
    out.push('\n');
    for (i, v) in s.values.iter().enumerate() {
        out.push_str(&num(s.grid.node(i)));
        for e in v.as_slice() {
            out.push(',');
            out.push_str(&num(*e));
        }
        out.push('\n');
    }
    if let Some(x) = s.blow_up_x() {
        let _ = writeln!(out, "# blow_up_x = {}", num(x));
    }
    out
}

/// Side-by-side `E` and `F` tables on the same grid.
pub fn format_propagators(e: &PropagatorTable, f: &PropagatorTable, nodes: impl Iterator<Item = f64>) -> String {
    let n = e.dim();
    let mut out = String::from("x");
    for h in entry_headers("E", n, n).chain(entry_headers("F", n, n)) {
        out.push(',');
        out.push_str(&h);
    }
    out.push('\n');
    for (x, (ev, fv)) in nodes.zip(e.values.iter().zip(&f.values)) {
        out.push_str(&num(x));
        for v in ev.as_slice().iter().chain(fv.as_slice()) {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io {
            path: path.display().to_string(),
            message: "not a file path".into(),
        })?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

pub fn write_solution(s: &Solution, path: &Path) -> Result<()> {
    write_atomic(path, &format_solution(s))
}

/// A parsed CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// Each row starts with `x`.
    pub rows: Vec<Vec<f64>>,
    pub blow_up_x: Option<f64>,
}

pub fn parse_table(text: &str) -> Result<Table> {
    let bad = |line: usize, what: String| Error::Problem(format!("csv line {line}: {what}"));
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if columns.first().map(String::as_str) != Some("x") {
        return Err(bad(1, "header must start with `x`".into()));
    }
    let mut rows = Vec::new();
    let mut blow_up_x = None;
    for (i, line) in lines {
        let lineno = i + 1;
        if let Some(comment) = line.strip_prefix('#') {
            if blow_up_x.is_some() {
                return Err(bad(lineno, "more than one comment line".into()));
            }
            let value = comment
                .trim()
                .strip_prefix("blow_up_x")
                .and_then(|r| r.trim_start().strip_prefix('='))
                .ok_or_else(|| bad(lineno, "unrecognized comment".into()))?;
            blow_up_x = Some(parse_num(value.trim()).ok_or_else(|| bad(lineno, "bad blow_up_x".into()))?);
            continue;
        }
        if blow_up_x.is_some() {
            return Err(bad(lineno, "data after the trailing comment".into()));
        }
        let row = line
            .split(',')
            .map(|s| parse_num(s.trim()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad(lineno, "non-numeric field".into()))?;
        if row.len() != columns.len() {
            return Err(bad(
                lineno,
                format!("{} fields, header has {}", row.len(), columns.len()),
            ));
        }
        rows.push(row);
    }
    Ok(Table {
        columns,
        rows,
        blow_up_x,
    })
}

fn parse_num(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}
