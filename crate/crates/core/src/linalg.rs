//! Dense real matrix algebra.
//!
//! [`Matrix`] is a thin wrapper over a `nalgebra` dense matrix that refuses
//! non-finite entries and uses row-major order at its boundaries (constructors,
//! serialization). [`SymmetricMatrix`] stores only the upper triangle, so a
//! reconstructed matrix is symmetric by construction.
//!
//! The notational operators used throughout the synthesis conditions live
//! here as free functions: [`kron`], [`hadamard`], [`vec`],
//! [`elementwise_leq`] and [`Matrix::abs`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyDimension { rows: usize, cols: usize },
    #[error("ragged rows: row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Dense real matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyDimension { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(LinalgError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: idx / cols,
                col: idx % cols,
            });
        }
        Ok(Matrix(DMatrix::from_row_slice(rows, cols, &data)))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(LinalgError::Ragged {
                    row: i,
                    expected: ncols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(nrows, ncols, data)
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(LinalgError::EmptyDimension {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Matrix(m))
    }

    /// Wraps an intermediate result computed from finite inputs.
    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        debug_assert!(m.iter().all(|x| x.is_finite()));
        Matrix(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = DMatrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        Matrix(m)
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Matrix(DMatrix::from_column_slice(v.len(), 1, v))
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix(DMatrix::from_element(rows, cols, value))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Column-major entries; for a column vector this is just its contents.
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix(self.0.transpose())
    }

    /// Element-wise absolute value `|A|`.
    pub fn abs(&self) -> Matrix {
        Matrix(self.0.abs())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix(&self.0 * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn checked_mul(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols() != rhs.rows() {
            return Err(LinalgError::DimensionMismatch {
                op: "mul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Matrix(&self.0 * &rhs.0))
    }

    pub fn checked_add(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                op: "add",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Matrix(&self.0 + &rhs.0))
    }

    /// Solves `self * X = rhs` for square `self` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        if self.rows() != rhs.rows() {
            return Err(LinalgError::DimensionMismatch {
                op: "solve",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let x = self.0.clone().lu().solve(&rhs.0).ok_or(LinalgError::Singular)?;
        Matrix::from_dmatrix(x).map_err(|_| LinalgError::Singular)
    }

    pub fn inverse(&self) -> Result<Matrix, LinalgError> {
        self.solve(&Matrix::identity(self.rows()))
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .0
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values().last().copied().unwrap_or(0.0)
    }

    /// Numerical rank: singular values above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s = self.singular_values();
        let smax = s.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        s.iter().filter(|&&x| x > rel_tol * smax).count()
    }

    /// Minimum-norm least-squares solution of `self * X = rhs`, discarding
    /// singular values below `rel_tol * sigma_max`.
    pub fn least_squares(&self, rhs: &Matrix, rel_tol: f64) -> Result<Matrix, LinalgError> {
        if self.rows() != rhs.rows() {
            return Err(LinalgError::DimensionMismatch {
                op: "least_squares",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let svd = self.0.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = if smax > 0.0 { rel_tol * smax } else { f64::MIN_POSITIVE };
        let x = svd
            .solve(&rhs.0, eps)
            .map_err(|e| LinalgError::Precondition(e.to_string()))?;
        Ok(Matrix::wrap(x))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{:?}", self.to_rows())
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows() {
            let row: Vec<String> = (0..self.cols()).map(|j| format!("{:>10.4}", self.0[(i, j)])).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&Matrix> for &Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                Matrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: Matrix) -> Matrix {
                Matrix(self.0 $op rhs.0)
            }
        }
        impl $tr<&Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                Matrix(self.0 $op &rhs.0)
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix(-&self.0)
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix(-self.0)
    }
}

/// Symmetric matrix stored as its upper triangle, row by row.
#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl SymmetricMatrix {
    fn idx(dim: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * dim - i * (i + 1) / 2 + j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.set(i, i, 1.0);
        }
        s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[Self::idx(self.dim, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = Self::idx(self.dim, i, j);
        self.upper[k] = v;
    }

    /// Upper-triangle entries, row by row.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Builds from a square matrix whose asymmetry is within `tol` (relative
    /// to its largest entry); the stored value is the average of the two
    /// triangles.
    pub fn from_matrix(m: &Matrix, tol: f64) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        let scale = 1.0 + m.max_abs();
        let mut asym: f64 = 0.0;
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let (a, b) = (m.get(i, j), m.get(j, i));
                asym = asym.max((a - b).abs());
                s.set(i, j, 0.5 * (a + b));
            }
        }
        if asym > tol * scale {
            return Err(LinalgError::NotSymmetric(asym));
        }
        Ok(s)
    }

    pub(crate) fn from_dmatrix_sym(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                s.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        s
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix(self.to_dmatrix())
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigenvalues(&self.to_dmatrix())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn inverse(&self) -> Result<SymmetricMatrix, LinalgError> {
        let inv = self.to_dmatrix().try_inverse().ok_or(LinalgError::Singular)?;
        if inv.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::Singular);
        }
        Ok(Self::from_dmatrix_sym(&inv))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymmetricMatrix{:?}", self.to_matrix().to_rows())
    }
}

impl Serialize for SymmetricMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_matrix().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymmetricMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = Matrix::deserialize(d)?;
        SymmetricMatrix::from_matrix(&m, 1e-9).map_err(serde::de::Error::custom)
    }
}

/// Ascending eigenvalues of the symmetric part of `m`.
pub(crate) fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = 0.5 * (m + m.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub(crate) fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Kronecker product: block `(i, j)` of the result is `a[i][j] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a.get(i, j);
            if aij == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b.get(k, l);
                }
            }
        }
    }
    Matrix(out)
}

/// Entrywise (Hadamard) product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "hadamard",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(Matrix(a.0.component_mul(&b.0)))
}

/// Stacks the columns of `a` into one column vector.
pub fn vec(a: &Matrix) -> Matrix {
    // nalgebra storage is already column-major
    Matrix(DMatrix::from_column_slice(a.rows() * a.cols(), 1, a.0.as_slice()))
}

/// Inverse of [`vec`] for a `rows x cols` target.
pub fn unvec(v: &Matrix, rows: usize, cols: usize) -> Result<Matrix, LinalgError> {
    if v.rows() * v.cols() != rows * cols {
        return Err(LinalgError::EntryCount {
            rows,
            cols,
            expected: rows * cols,
            got: v.rows() * v.cols(),
        });
    }
    Ok(Matrix(DMatrix::from_column_slice(rows, cols, v.0.as_slice())))
}

/// Element-wise order: true iff `a[i][j] <= b[i][j]` everywhere.
pub fn elementwise_leq(a: &Matrix, b: &Matrix) -> Result<bool, LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "elementwise_leq",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(a.0.iter().zip(b.0.iter()).all(|(x, y)| x <= y))
}

/// Largest singular value, from the largest eigenvalue of the Gram matrix.
pub fn spectral_norm(a: &Matrix) -> f64 {
    let gram = if a.rows() <= a.cols() {
        &a.0 * a.0.transpose()
    } else {
        a.0.transpose() * &a.0
    };
    sym_max_eigenvalue(&gram).max(0.0).sqrt()
}

/// Default definiteness margin, `1e-9 * (1 + max |a_ij|)`.
pub fn default_margin(a: &SymmetricMatrix) -> f64 {
    1e-9 * (1.0 + a.max_abs())
}

/// True iff the smallest eigenvalue of `a` exceeds `margin`.
pub fn is_positive_definite(a: &SymmetricMatrix, margin: f64) -> bool {
    a.min_eigenvalue() > margin
}

fn check_column(x: &Matrix, n: usize, name: &str) -> Result<(), LinalgError> {
    if x.shape() != (n, 1) {
        return Err(LinalgError::Precondition(format!(
            "{name} must be a {n}x1 column, got {:?}",
            x.shape()
        )));
    }
    Ok(())
}

/// Evaluates `2 x'y <= x'Px + y'P^{-1}y` for positive definite `p`.
pub fn check_lemma1(x: &Matrix, y: &Matrix, p: &SymmetricMatrix) -> Result<bool, LinalgError> {
    let n = p.dim();
    check_column(x, n, "x")?;
    check_column(y, n, "y")?;
    if !is_positive_definite(p, 0.0) {
        return Err(LinalgError::NotPositiveDefinite);
    }
    let pm = p.to_dmatrix();
    let pinv = pm.clone().cholesky().ok_or(LinalgError::NotPositiveDefinite)?.inverse();
    let lhs = 2.0 * x.0.dot(&y.0);
    let rhs = (x.0.transpose() * &pm * &x.0)[(0, 0)] + (y.0.transpose() * pinv * &y.0)[(0, 0)];
    let tol = 1e-10 * (1.0 + lhs.abs().max(rhs.abs()));
    Ok(lhs <= rhs + tol)
}

/// Evaluates the semidefinite bound
/// `(A+DFE)'P(A+DFE) <= A'(P^{-1} - D D'/eps)^{-1}A + eps E'E`
/// after checking `||F|| <= 1`, `eps > 0` and `P^{-1} - D D'/eps > 0`.
pub fn check_lemma2(
    a: &Matrix,
    d: &Matrix,
    e: &Matrix,
    f: &Matrix,
    p: &SymmetricMatrix,
    eps: f64,
) -> Result<bool, LinalgError> {
    let n = p.dim();
    if a.rows() != n || d.rows() != n || d.cols() != f.rows() || f.cols() != e.rows() || e.cols() != a.cols() {
        return Err(LinalgError::Precondition(format!(
            "inconsistent shapes A{:?} D{:?} F{:?} E{:?} P{n}x{n}",
            a.shape(),
            d.shape(),
            f.shape(),
            e.shape()
        )));
    }
    if !(eps > 0.0) {
        return Err(LinalgError::Precondition("eps must be positive".into()));
    }
    if spectral_norm(f) > 1.0 + 1e-12 {
        return Err(LinalgError::Precondition("F'F <= I violated".into()));
    }
    let pm = p.to_dmatrix();
    let pinv = pm.clone().cholesky().ok_or(LinalgError::NotPositiveDefinite)?.inverse();
    let inner = &pinv - (&d.0 * d.0.transpose()) / eps;
    let inner_sym = SymmetricMatrix::from_dmatrix_sym(&inner);
    if !is_positive_definite(&inner_sym, 0.0) {
        return Err(LinalgError::Precondition(
            "P^-1 - D D'/eps is not positive definite".into(),
        ));
    }
    let inner_inv = inner.cholesky().ok_or(LinalgError::NotPositiveDefinite)?.inverse();
    let pert = &a.0 + &d.0 * &f.0 * &e.0;
    let lhs = pert.transpose() * &pm * &pert;
    let rhs = a.0.transpose() * inner_inv * &a.0 + (e.0.transpose() * &e.0) * eps;
    let diff = &lhs - &rhs;
    let tol = 1e-9 * (1.0 + rhs.amax().max(lhs.amax()));
    Ok(sym_max_eigenvalue(&diff) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_counts() {
        assert!(matches!(
            Matrix::from_row_major(2, 2, vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            Matrix::from_row_major(2, 2, vec![1.0]),
            Err(LinalgError::EntryCount { .. })
        ));
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn kron_identity_and_zero() {
        let b = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(kron(&Matrix::identity(1), &b), b);
        let z = kron(&Matrix::zeros(2, 3), &b);
        assert_eq!(z.shape(), (4, 9));
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn kron_two_by_two() {
        // a_ij * [[0,1],[1,0]] expanded block by block
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let expected = m(&[
            &[0.0, 1.0, 0.0, 2.0],
            &[1.0, 0.0, 2.0, 0.0],
            &[0.0, 3.0, 0.0, 4.0],
            &[3.0, 0.0, 4.0, 0.0],
        ]);
        assert_eq!(kron(&a, &b), expected);
    }

    #[test]
    fn hadamard_cases() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(hadamard(&a, &Matrix::filled(2, 2, 1.0)).unwrap(), a);
        assert_eq!(
            hadamard(&a, &Matrix::identity(2)).unwrap(),
            m(&[&[1.0, 0.0], &[0.0, 4.0]])
        );
        assert_eq!(
            hadamard(&a, &m(&[&[2.0, 0.0], &[0.0, 2.0]])).unwrap(),
            m(&[&[2.0, 0.0], &[0.0, 8.0]])
        );
        assert!(hadamard(&a, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn vec_stacks_columns() {
        let col = Matrix::column_vector(&[1.0, 2.0, 3.0]);
        assert_eq!(vec(&col), col);
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(vec(&a).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        let z = vec(&Matrix::zeros(2, 3));
        assert_eq!(z.shape(), (6, 1));
        assert_eq!(z.max_abs(), 0.0);
        assert_eq!(unvec(&vec(&a), 2, 2).unwrap(), a);
    }

    #[test]
    fn elementwise_order() {
        let a = m(&[&[1.0, -2.0], &[3.0, 0.5]]);
        assert!(elementwise_leq(&a, &a).unwrap());
        assert!(elementwise_leq(&a.abs(), &(a.abs() + Matrix::filled(2, 2, 1.0))).unwrap());
        assert!(!elementwise_leq(&m(&[&[1.0, 5.0]]), &m(&[&[2.0, 4.0]])).unwrap());
        assert!(elementwise_leq(&a, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn spectral_norm_cases() {
        assert!((spectral_norm(&Matrix::identity(4)) - 1.0).abs() < 1e-10);
        let d = Matrix::from_diagonal(&[0.1, 0.2, 0.3, 0.0, 0.1]);
        assert!((spectral_norm(&d) - 0.3).abs() < 1e-10);
        // M M' = [[25,0],[0,0]]
        assert!((spectral_norm(&m(&[&[3.0, 4.0], &[0.0, 0.0]])) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn positive_definiteness() {
        assert!(is_positive_definite(&SymmetricMatrix::identity(3), 0.5));
        assert!(!is_positive_definite(&SymmetricMatrix::zeros(3), 0.0));
        let s = SymmetricMatrix::from_matrix(&m(&[&[2.0, 1.0], &[1.0, 2.0]]), 0.0).unwrap();
        assert!(is_positive_definite(&s, 0.9));
        assert!(!is_positive_definite(&s, 1.0));
        let ev = s.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_storage_round_trip() {
        let a = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 5.0], &[3.0, 5.0, 6.0]]);
        let s = SymmetricMatrix::from_matrix(&a, 0.0).unwrap();
        assert_eq!(s.upper(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.to_matrix(), a);
        assert!(SymmetricMatrix::from_matrix(&m(&[&[1.0, 2.0], &[0.0, 1.0]]), 1e-9).is_err());
    }

    #[test]
    fn lemma_checks_trivial_cases() {
        let zero = Matrix::zeros(3, 1);
        let p = SymmetricMatrix::identity(3);
        assert!(check_lemma1(&zero, &zero, &p).unwrap());
        let y = Matrix::column_vector(&[1.0, -2.0, 0.5]);
        assert!(check_lemma1(&zero, &y, &p).unwrap());
        assert!(check_lemma1(&zero, &y, &SymmetricMatrix::zeros(3)).is_err());

        let a = m(&[&[0.5, 0.1], &[0.0, 0.3]]);
        let e = m(&[&[1.0, 0.0]]);
        let f = m(&[&[0.7]]);
        let p2 = SymmetricMatrix::identity(2);
        assert!(check_lemma2(&a, &Matrix::zeros(2, 1), &e, &f, &p2, 0.3).unwrap());
        let d = m(&[&[0.2], &[0.1]]);
        assert!(check_lemma2(&a, &d, &e, &Matrix::zeros(1, 1), &p2, 0.5).unwrap());
        // ||F|| > 1
        assert!(check_lemma2(&a, &d, &e, &m(&[&[1.5]]), &p2, 0.5).is_err());
        // P^-1 - DD'/eps not positive definite
        assert!(check_lemma2(&a, &d, &e, &f, &p2, 0.01).is_err());
    }

    #[test]
    fn rank_and_least_squares() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0], &[0.0, 0.0]]);
        assert_eq!(a.rank(1e-9), 1);
        let b = Matrix::column_vector(&[1.0, 2.0, 0.0]);
        let x = a.least_squares(&b, 1e-9).unwrap();
        assert!((&a * &x - &b).frobenius_norm() < 1e-12);
        let sq = m(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let inv = sq.inverse().unwrap();
        assert!((&sq * &inv - Matrix::identity(2)).max_abs() < 1e-14);
        assert_eq!(m(&[&[1.0, 2.0], &[2.0, 4.0]]).inverse(), Err(LinalgError::Singular));
    }
}
