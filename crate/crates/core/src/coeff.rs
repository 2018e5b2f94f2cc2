//! Matrix-valued coefficient functions of `x`.

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::expr::{self, Expr};

/// Safety margin applied to the sampled supremum.
pub const BOUND_SAFETY_FACTOR: f64 = 1.25;

/// A matrix of expressions in `x`, valid on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
    domain: (f64, f64),
}

/// Empirical bound on the max-abs entry of a coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Sampled supremum, inflated by [`BOUND_SAFETY_FACTOR`].
    pub m: f64,
    pub probes: usize,
    /// Where evaluation first failed, if it did.
    pub offending_point: Option<f64>,
}

impl CoeffMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Expr>, domain: (f64, f64)) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(Error::BadLength {
                rows,
                cols,
                len: entries.len(),
            });
        }
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "coefficient domain [{lo}, {hi}] must satisfy 0 <= lo < hi"
            )));
        }
        Ok(CoeffMatrix {
            rows,
            cols,
            entries,
            domain,
        })
    }

    /// Parses a grid of expression strings.
    pub fn parse<R, S>(rows: &[R], domain: (f64, f64)) -> Result<Self>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(nrows * ncols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::BadLength {
                    rows: nrows,
                    cols: ncols,
                    len: row.len(),
                });
            }
            for text in row {
                entries.push(expr::parse(text.as_ref())?);
            }
        }
        CoeffMatrix::new(nrows, ncols, entries, domain)
    }

    /// Constant coefficient matrix with the given numeric entries.
    pub fn constant(m: &Matrix, domain: (f64, f64)) -> Result<Self> {
        let entries = m.as_slice().iter().map(|&v| Expr::Num(v)).collect();
        CoeffMatrix::new(m.rows(), m.cols(), entries, domain)
    }

    pub fn zeros(rows: usize, cols: usize, domain: (f64, f64)) -> Result<Self> {
        CoeffMatrix::new(rows, cols, vec![Expr::Num(0.0); rows * cols], domain)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expr {
        &self.entries[row * self.cols + col]
    }

    /// Same expressions on a sub-interval of the domain.
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<Self> {
        let (dlo, dhi) = self.domain;
        if lo < dlo || hi > dhi {
            return Err(Error::OutsideDomain {
                x: if lo < dlo { lo } else { hi },
                lo: dlo,
                hi: dhi,
            });
        }
        CoeffMatrix::new(self.rows, self.cols, self.entries.clone(), (lo, hi))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    pub fn eval(&self, x: f64) -> Result<Matrix> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain {
                x,
                lo: self.domain.0,
                hi: self.domain.1,
            });
        }
        let mut data = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            let v = e.eval(x).map_err(|err| match err {
                Error::Domain { x, expr } => Error::CoeffDomain {
                    row: i / self.cols,
                    col: i % self.cols,
                    x,
                    expr,
                },
                other => other,
            })?;
            data.push(v);
        }
        Matrix::new(self.rows, self.cols, data)
    }

    /// Samples `probes` equispaced points of the domain, endpoints included,
    /// and reports the largest max-abs entry times [`BOUND_SAFETY_FACTOR`].
    pub fn bound_estimate(&self, probes: usize) -> Result<BoundReport> {
        if probes < 2 {
            return Err(Error::InvalidConfig(format!(
                "bound_estimate needs at least 2 probes, got {probes}"
            )));
        }
        let (lo, hi) = self.domain;
        let step = (hi - lo) / (probes - 1) as f64;
        let mut sup = 0.0f64;
        for i in 0..probes {
            let x = if i + 1 == probes { hi } else { lo + i as f64 * step };
            match self.eval(x) {
                Ok(m) => sup = sup.max(m.norm_max()),
                Err(_) => {
                    return Err(Error::Unbounded {
                        report: BoundReport {
                            m: sup * BOUND_SAFETY_FACTOR,
                            probes: i,
                            offending_point: Some(x),
                        },
                    })
                }
            }
        }
        Ok(BoundReport {
            m: sup * BOUND_SAFETY_FACTOR,
            probes,
            offending_point: None,
        })
    }

    pub fn negated(&self) -> CoeffMatrix {
        CoeffMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().cloned().map(Expr::negated).collect(),
            domain: self.domain,
        }
    }
}

/// Bound from matrices already sampled at grid nodes.
pub fn sampled_bound(samples: &[Matrix]) -> BoundReport {
    let sup = samples.iter().map(Matrix::norm_max).fold(0.0, f64::max);
    BoundReport {
        m: sup * BOUND_SAFETY_FACTOR,
        probes: samples.len(),
        offending_point: None,
    }
}
