//! Dense symmetric positive-definite factorization.
//!
//! The objective and its gradient are built around exactly one Cholesky
//! factorization of the information matrix per evaluation. The factorizer is a
//! trait so tests can count calls.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `L⁻¹`, obtained by forward substitution against the identity.
    pub fn inverse_lower(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::identity(n, n);
        self.lower.solve_lower_triangular_unchecked_mut(&mut inv);
        inv
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let w = self.inverse_lower();
        w.transpose() * &w
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = rhs.clone();
        self.lower.solve_lower_triangular_unchecked_mut(&mut x);
        self.lower.tr_solve_lower_triangular_unchecked_mut(&mut x);
        x
    }

    /// `L z`, used to draw samples with covariance `A`.
    pub fn mul_lower(&self, z: &DVector<f64>) -> DVector<f64> {
        self.lower.lower_triangle() * z
    }
}

pub trait SpdFactorizer {
    fn factor(&self, a: DMatrix<f64>) -> Result<CholeskyFactor>;
}

/// Right-looking dense Cholesky. Reports the first non-positive pivot.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseCholesky;

impl SpdFactorizer for DenseCholesky {
    fn factor(&self, a: DMatrix<f64>) -> Result<CholeskyFactor> {
        cholesky(a)
    }
}

pub fn cholesky(mut a: DMatrix<f64>) -> Result<CholeskyFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "square matrix columns",
            expected: n,
            found: a.ncols(),
        });
    }
    let mut row = DVector::zeros(n);
    for j in 0..n {
        // a[j.., j] -= a[j.., ..j] · a[j, ..j]ᵀ
        if j > 0 {
            let mut head = row.rows_mut(0, j);
            head.copy_from(&a.view((j, 0), (1, j)).transpose());
            let (left, mut right) = a.columns_range_pair_mut(..j, j..);
            let mut col = right.column_mut(0);
            let mut col = col.rows_mut(j, n - j);
            col.gemv(-1.0, &left.rows(j, n - j), &row.rows(0, j), 1.0);
        }
        let pivot = a[(j, j)];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let diag = pivot.sqrt();
        a[(j, j)] = diag;
        a.column_mut(j).rows_mut(j + 1, n - j - 1).unscale_mut(diag);
    }
    a.fill_upper_triangle(0.0, 1);
    Ok(CholeskyFactor { lower: a })
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn symmetric_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
