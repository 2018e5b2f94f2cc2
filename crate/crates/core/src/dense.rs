//! Dense real matrices.
//!
//! Storage is row-major. Every constructor rejects NaN and infinite entries,
//! and every arithmetic operation re-checks its output, so a value of type
//! [`Matrix`] is always finite.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        check_finite(rows, cols, &data)?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows, all of equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::BadLength {
                    rows: nrows,
                    cols: ncols,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(nrows, ncols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Result<Self> {
        Matrix::new(values.len(), 1, values.to_vec())
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Matrix::new(1, 1, vec![value])
    }

    /// Wraps entries the caller has produced by finite arithmetic, checking
    /// them once on the way in.
    fn checked(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_finite(rows, cols, &data)?;
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "mat_mul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * m..(p + 1) * m];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Matrix::checked(n, m, out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "mat_add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "mat_sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Result<Matrix> {
        Matrix::checked(self.rows, self.cols, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn neg(&self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn trace(&self) -> Result<f64> {
        self.require_square("mat_trace")?;
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Max-abs entry of `self - rhs`; shapes must agree.
    pub fn max_abs_diff(&self, rhs: &Matrix) -> Result<f64> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op: "max_abs_diff",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs())))
    }

    /// Copies the `rows × cols` block starting at `(row0, col0)`.
    pub fn submatrix(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols);
        let mut data = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            let start = r * self.cols + col0;
            data.extend_from_slice(&self.data[start..start + cols]);
        }
        Matrix { rows, cols, data }
    }

    /// Assembles a block matrix. Blocks in the same block-row must share a
    /// row count; blocks in the same block-column must share a column count.
    pub fn from_blocks(blocks: &[&[&Matrix]]) -> Result<Matrix> {
        let first_row = blocks.first().ok_or(Error::EmptyMatrix { rows: 0, cols: 0 })?;
        let col_widths: Vec<usize> = first_row.iter().map(|b| b.cols).collect();
        let total_cols: usize = col_widths.iter().sum();
        let mut data = Vec::new();
        let mut total_rows = 0;
        for block_row in blocks {
            if block_row.len() != col_widths.len() {
                return Err(Error::BadLength {
                    rows: blocks.len(),
                    cols: col_widths.len(),
                    len: block_row.len(),
                });
            }
            let height = block_row[0].rows;
            for (b, &w) in block_row.iter().zip(&col_widths) {
                if b.rows != height || b.cols != w {
                    return Err(Error::DimensionMismatch {
                        op: "from_blocks",
                        left: (height, w),
                        right: b.shape(),
                    });
                }
            }
            for r in 0..height {
                for b in block_row.iter() {
                    data.extend_from_slice(&b.data[r * b.cols..(r + 1) * b.cols]);
                }
            }
            total_rows += height;
        }
        Matrix::new(total_rows, total_cols, data)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.require_square("mat_inverse")?;
        let n = self.rows;
        let lu = Lu::factor(self);
        let threshold = SINGULAR_PIVOT_RTOL * self.norm_max();
        for (k, &p) in lu.pivots.iter().enumerate() {
            if p.is_nan() || p.abs() <= threshold || p == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
        }
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            lu.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        Matrix::checked(n, n, inv)
    }

    pub fn det(&self) -> Result<f64> {
        self.require_square("mat_det")?;
        let lu = Lu::factor(self);
        let prod: f64 = lu.pivots.iter().product();
        Ok(if lu.odd_permutation { -prod } else { prod })
    }

    /// Matrix exponential by scaling and squaring around a Taylor core.
    pub fn expm(&self) -> Result<Matrix> {
        self.require_square("mat_expm")?;
        let n = self.rows;
        // Infinity norm bounds the spectral radius.
        let norm = self
            .data
            .chunks(n)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > 0.5 {
            scaled_norm /= 2.0;
            squarings += 1;
        }
        let scaled = self.scale(0.5f64.powi(squarings as i32))?;
        let mut result = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..=EXPM_TAYLOR_TERMS {
            term = term.mul(&scaled)?.scale(1.0 / k as f64)?;
            result = result.add(&term)?;
        }
        for _ in 0..squarings {
            result = result.mul(&result)?;
        }
        Ok(result)
    }

    fn zip_with(&self, rhs: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Matrix::checked(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        )
    }

    fn require_square(&self, op: &'static str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                op,
                shape: self.shape(),
            })
        }
    }
}

// ‖A/2^s‖ ≤ 1/2, so 0.5^20 / 20! is far below double precision.
const EXPM_TAYLOR_TERMS: usize = 20;

fn check_finite(rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    debug_assert_eq!(data.len(), rows * cols);
    match data.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite {
            row: i / cols,
            col: i % cols,
            value: data[i],
        }),
    }
}

/// In-place LU factorization with partial pivoting: `P·A = L·U`, unit lower L.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    pivots: Vec<f64>,
    odd_permutation: bool,
}

impl Lu {
    fn factor(a: &Matrix) -> Lu {
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let mut odd = false;
        for k in 0..n {
            let (p, _) =
                (k..n)
                    .map(|r| (r, lu[r * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                odd = !odd;
            }
            let pivot = lu[k * n + k];
            pivots.push(pivot);
            if pivot == 0.0 {
                continue;
            }
            for r in k + 1..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in k + 1..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
            }
        }
        Lu {
            n,
            lu,
            perm,
            pivots,
            odd_permutation: odd,
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let permuted: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * b[j]).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * b[j]).sum();
            b[i] = (b[i] - s) / self.lu[i * n + i];
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.cols)).finish()
    }
}
