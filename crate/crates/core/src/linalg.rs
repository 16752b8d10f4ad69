//! Small dense helpers shared by the detector and the estimators.

use nalgebra::{DMatrix, Dim, Matrix, RawStorage};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Condition estimate above which a solve is reported in the log.
pub const CONDITION_WARNING: f64 = 1e10;

/// Row-major copy of a complex matrix with split real and imaginary parts,
/// laid out for row-wise accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMajor {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl RowMajor {
    pub fn from_matrix<R: Dim, C: Dim, S: RawStorage<Complex64, R, C>>(
        m: &Matrix<Complex64, R, C, S>,
    ) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = m[(r, c)];
                re.push(v.re);
                im.push(v.im);
            }
        }
        RowMajor { rows, cols, re, im }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMajor {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[f64], &[f64]) {
        let span = r * self.cols..(r + 1) * self.cols;
        (&self.re[span.clone()], &self.im[span])
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> (&mut [f64], &mut [f64]) {
        let span = r * self.cols..(r + 1) * self.cols;
        (&mut self.re[span.clone()], &mut self.im[span])
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let k = r * self.cols + c;
        Complex64::new(self.re[k], self.im[k])
    }
}

/// Regularized least squares `(A^H A + ridge I)^{-1} A^H Y` through a
/// Cholesky factorization of the regularized Gram matrix.
pub fn ridge_solve(a: &CMatrix, y: &CMatrix, ridge: f64) -> Result<CMatrix> {
    if a.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "design has {} rows, observation {}",
            a.nrows(),
            y.nrows()
        )));
    }
    let gram = a.ad_mul(a);
    let rhs = a.ad_mul(y);
    solve_gram(gram, rhs, ridge)
}

/// Solves `(G + ridge I) X = B` for Hermitian positive semi-definite `G`.
pub fn solve_gram(mut gram: CMatrix, rhs: CMatrix, ridge: f64) -> Result<CMatrix> {
    let size = gram.nrows();
    if size == 0 {
        return Ok(CMatrix::zeros(0, rhs.ncols()));
    }
    for i in 0..size {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky().ok_or(Error::Singular { size, ridge })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.re.abs()), hi.max(d.re.abs()))
    });
    let condition = (hi / lo).powi(2);
    if condition > CONDITION_WARNING {
        log::warn!("regularized Gram matrix of size {size} has condition estimate {condition:.3e}");
    }
    Ok(chol.solve(&rhs))
}

/// Frobenius energy of a matrix.
pub fn energy<R: Dim, C: Dim, S: RawStorage<Complex64, R, C>>(
    m: &Matrix<Complex64, R, C, S>,
) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}
