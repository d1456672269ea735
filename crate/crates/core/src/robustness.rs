//! Tolerable additive nonlinear uncertainty.
//!
//! If the certified Lipschitz constant is `gamma*` and the nominal
//! nonlinearity has constant `gamma`, any additive perturbation with
//! constant at most `gamma* - gamma` keeps the certificate. The matrix
//! version bounds each entry of a matrix-valued Lipschitz constant.

use serde::{Deserialize, Serialize};

use crate::linalg::{elementwise_leq, hadamard, spectral_norm, sym_eigenvalues, LinalgError, Matrix};

/// `gamma* - gamma`; negative values mean there is no certified margin.
pub fn normwise_margin(gamma_actual: f64, gamma_star: f64) -> f64 {
    gamma_star - gamma_actual
}

/// Whether a perturbation whose Jacobian norm is bounded by
/// `jacobian_norm_bound` fits within `margin` (boundary included).
pub fn jacobian_margin_check(jacobian_norm_bound: f64, margin: f64) -> bool {
    jacobian_norm_bound <= margin.max(0.0)
}

fn square_pair(s: &Matrix, t: &Matrix, op: &'static str) -> Result<(), LinalgError> {
    if !s.is_square() || s.shape() != t.shape() {
        return Err(LinalgError::DimensionMismatch {
            op,
            left: s.shape(),
            right: t.shape(),
        });
    }
    Ok(())
}

/// Smallest eigenvalue of `(T T') o (n I) - S S'`.
pub fn hadamard_lemma_slack(s: &Matrix, t: &Matrix) -> Result<f64, LinalgError> {
    square_pair(s, t, "hadamard_lemma")?;
    if !elementwise_leq(&s.abs(), t)? {
        return Err(LinalgError::Precondition("|S| <= T elementwise does not hold".into()));
    }
    let n = s.rows();
    let ttn = hadamard(&(t * &t.transpose()), &Matrix::identity(n).scale(n as f64))?;
    let diff = ttn - s * &s.transpose();
    Ok(sym_eigenvalues(diff.as_dmatrix()).first().copied().unwrap_or(0.0))
}

/// Checks `S S' <= (T T') o (n I)` for `|S| <= T`.
pub fn check_hadamard_lemma(s: &Matrix, t: &Matrix) -> Result<bool, LinalgError> {
    let slack = hadamard_lemma_slack(s, t)?;
    Ok(slack >= -1e-10 * (1.0 + t.max_abs().powi(2) * s.rows() as f64))
}

/// Whether `|Gamma_delta| <= Gamma* / sqrt(n)` elementwise.
///
/// When it holds, `sigma_max(Gamma_delta) <= sigma_max(Gamma*)` follows and
/// is asserted as a consistency check.
pub fn admissible_perturbation_check(gamma_delta: &Matrix, gamma_star: &Matrix) -> Result<bool, LinalgError> {
    square_pair(gamma_delta, gamma_star, "admissible_perturbation_check")?;
    let n = gamma_delta.rows() as f64;
    let ok = elementwise_leq(&gamma_delta.abs(), &gamma_star.scale(1.0 / n.sqrt()))?;
    if ok {
        let (sd, ss) = (spectral_norm(gamma_delta), spectral_norm(gamma_star));
        assert!(
            sd <= ss + 1e-10 * (1.0 + ss),
            "admissible perturbation exceeds the bound: {sd} > {ss}"
        );
    }
    Ok(ok)
}

/// Entrywise interval `[-g*_ij / sqrt(n) - g_ij, g*_ij / sqrt(n) - g_ij]`
/// for perturbations `delta_ij` of the matrix-valued Lipschitz constant.
pub fn elementwise_bounds(gamma: &Matrix, gamma_star: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    square_pair(gamma, gamma_star, "elementwise_bounds")?;
    if gamma_star.as_slice().iter().any(|&x| x < 0.0) {
        return Err(LinalgError::Precondition(
            "Gamma* must be elementwise nonnegative".into(),
        ));
    }
    let scaled = gamma_star.scale(1.0 / (gamma.rows() as f64).sqrt());
    Ok((-&scaled - gamma, &scaled - gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub gamma_actual: f64,
    pub gamma_star: f64,
    pub normwise_margin: f64,
    pub gamma_matrix_actual: Option<Matrix>,
    pub gamma_matrix_star: Option<Matrix>,
    pub elementwise_lower: Option<Matrix>,
    pub elementwise_upper: Option<Matrix>,
}

impl RobustnessReport {
    pub fn new(gamma_actual: f64, gamma_star: f64) -> Self {
        RobustnessReport {
            gamma_actual,
            gamma_star,
            normwise_margin: normwise_margin(gamma_actual, gamma_star),
            gamma_matrix_actual: None,
            gamma_matrix_star: None,
            elementwise_lower: None,
            elementwise_upper: None,
        }
    }

    /// Adds the entrywise intervals for a matrix-valued bound.
    pub fn with_matrices(mut self, gamma: Matrix, gamma_star: Matrix) -> Result<Self, LinalgError> {
        let (lo, hi) = elementwise_bounds(&gamma, &gamma_star)?;
        self.gamma_matrix_actual = Some(gamma);
        self.gamma_matrix_star = Some(gamma_star);
        self.elementwise_lower = Some(lo);
        self.elementwise_upper = Some(hi);
        Ok(self)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
