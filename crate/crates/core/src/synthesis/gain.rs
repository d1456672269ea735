use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{kron, spectral_norm, vec, LinalgError, Matrix, SymmetricMatrix};

/// Relative singular-value threshold for rank decisions.
pub const GAIN_RANK_TOL: f64 = 1e-9;

/// Outcome of solving `P B1 B1' Kbar = G` for `Kbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerSolution {
    pub kbar: Matrix,
    /// Spectral norm of `P B1 B1' Kbar - G`.
    pub residual: f64,
    /// Whether `vec(G)` lies in the column space of `I_p (x) P B1 B1'`.
    pub rank_condition: bool,
}

/// Least-squares solution of `(I_p (x) P B1 B1') vec(Kbar) = vec(G)`.
pub fn solve_gain_kronecker(p: &SymmetricMatrix, b1: &Matrix, g: &Matrix) -> Result<KroneckerSolution, LinalgError> {
    let n = p.dim();
    if b1.rows() != n || g.rows() != n {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_gain_kronecker",
            left: (n, n),
            right: (b1.rows(), g.rows()),
        });
    }
    let pbb = p.to_matrix().checked_mul(b1)?.checked_mul(&b1.transpose())?;
    let coef = kron(&Matrix::identity(g.cols()), &pbb);
    let rhs = vec(g);
    let x = coef.least_squares(&rhs, GAIN_RANK_TOL)?;
    let kbar = Matrix::wrap(DMatrix::from_column_slice(n, g.cols(), x.as_slice()));
    let residual = spectral_norm(&(&pbb.checked_mul(&kbar)? - g));

    let mut aug = coef.as_dmatrix().clone().insert_column(coef.cols(), 0.0);
    aug.column_mut(coef.cols()).copy_from(rhs.as_dmatrix());
    let rank_coef = coef.rank(GAIN_RANK_TOL);
    let rank_aug = Matrix::wrap(aug).rank(GAIN_RANK_TOL);
    Ok(KroneckerSolution {
        kbar,
        residual,
        rank_condition: rank_coef == rank_aug,
    })
}

/// Gain for the true output when the plant has a feedthrough `D1 u` term:
/// `(I + K D1)^{-1} K`.
pub fn transform_feedthrough(k: &Matrix, d1: &Matrix) -> Result<Matrix, LinalgError> {
    let kd = k.checked_mul(d1)?;
    if !kd.is_square() {
        return Err(LinalgError::NotSquare {
            rows: kd.rows(),
            cols: kd.cols(),
        });
    }
    let s = &Matrix::identity(kd.rows()) + &kd;
    if s.min_singular_value() <= 1e-9 {
        return Err(LinalgError::Singular);
    }
    s.solve(k)
}
