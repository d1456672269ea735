//! Canonical semidefinite programs over a real decision vector `v`:
//!
//! ```text
//! minimize    c'v
//! subject to  F0_j + sum_i v_i F_ij  <=  -tau I     for every block j
//!             E v = f
//!             lower_i <= v_i <= upper_i
//! ```
//!
//! Strict matrix inequalities are represented with the margin `tau` from
//! [`SolverConfig`]. The reference backend is [`BarrierSolver`], a
//! log-determinant barrier path-following method with a phase-I feasibility
//! stage; any other backend can be plugged in through [`SdpBackend`].

mod barrier;
mod dump;

pub use barrier::BarrierSolver;
pub use dump::{read_dump, write_dump, DumpError};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{sym_max_eigenvalue, SymmetricMatrix};

/// Bound applied to every variable unless the builder overrides it.
pub const DEFAULT_BOUND: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("objective has {got} entries, expected {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("problem has no LMI blocks")]
    NoBlocks,
    #[error("block {block}: coefficient for variable {var} has dim {got}, expected {expected}")]
    BlockDimension {
        block: usize,
        var: usize,
        expected: usize,
        got: usize,
    },
    #[error("block {block}: variable index {var} out of range")]
    VariableIndex { block: usize, var: usize },
    #[error("equality row {row} has {got} entries, expected {expected}")]
    EqualityLength { row: usize, expected: usize, got: usize },
    #[error("variable {var}: lower bound {lower} exceeds upper bound {upper}")]
    Bounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
}

/// Affine symmetric map `M(v) = F0 + sum_i v_i F_i`, constrained to `M(v) <= -tau I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub label: String,
    pub constant: SymmetricMatrix,
    pub terms: Vec<(usize, SymmetricMatrix)>,
}

impl LmiBlock {
    pub fn new(label: impl Into<String>, constant: SymmetricMatrix) -> Self {
        LmiBlock {
            label: label.into(),
            constant,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn with_term(mut self, var: usize, coeff: SymmetricMatrix) -> Self {
        self.terms.push((var, coeff));
        self
    }

    /// Evaluates `M(v)`.
    pub fn evaluate(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.to_dmatrix();
        for (i, f) in &self.terms {
            if v[*i] != 0.0 {
                m += f.to_dmatrix() * v[*i];
            }
        }
        m
    }

    /// Largest eigenvalue of `M(v)`.
    pub fn max_eigenvalue(&self, v: &[f64]) -> f64 {
        sym_max_eigenvalue(&self.evaluate(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Default for VariableBounds {
    fn default() -> Self {
        VariableBounds {
            lower: Some(-DEFAULT_BOUND),
            upper: Some(DEFAULT_BOUND),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    /// Rows of `E`; each has `num_vars` entries.
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub bounds: Vec<VariableBounds>,
}

impl SdpProblem {
    /// Feasibility problem (zero objective) with default bounds.
    pub fn new(num_vars: usize) -> Self {
        SdpProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            blocks: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            bounds: vec![VariableBounds::default(); num_vars],
        }
    }

    pub fn add_block(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    pub fn add_equality(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.num_vars {
            return Err(SdpError::ObjectiveLength {
                expected: self.num_vars,
                got: self.objective.len(),
            });
        }
        if self.objective.iter().any(|x| !x.is_finite()) {
            return Err(SdpError::NonFinite("objective"));
        }
        if self.blocks.is_empty() {
            return Err(SdpError::NoBlocks);
        }
        for (b, block) in self.blocks.iter().enumerate() {
            for (var, f) in &block.terms {
                if *var >= self.num_vars {
                    return Err(SdpError::VariableIndex { block: b, var: *var });
                }
                if f.dim() != block.dim() {
                    return Err(SdpError::BlockDimension {
                        block: b,
                        var: *var,
                        expected: block.dim(),
                        got: f.dim(),
                    });
                }
                if f.upper().iter().any(|x| !x.is_finite()) {
                    return Err(SdpError::NonFinite("block coefficient"));
                }
            }
            if block.constant.upper().iter().any(|x| !x.is_finite()) {
                return Err(SdpError::NonFinite("block constant"));
            }
        }
        for (r, row) in self.eq_rows.iter().enumerate() {
            if row.len() != self.num_vars {
                return Err(SdpError::EqualityLength {
                    row: r,
                    expected: self.num_vars,
                    got: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(SdpError::NonFinite("equalities"));
            }
        }
        if self.eq_rhs.len() != self.eq_rows.len() || self.eq_rhs.iter().any(|x| !x.is_finite()) {
            return Err(SdpError::NonFinite("equality rhs"));
        }
        if self.bounds.len() != self.num_vars {
            return Err(SdpError::ObjectiveLength {
                expected: self.num_vars,
                got: self.bounds.len(),
            });
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l > u {
                    return Err(SdpError::Bounds {
                        var: i,
                        lower: l,
                        upper: u,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    /// `max_r |E_r v - f_r|`, zero when there are no equalities.
    pub fn equality_residual(&self, v: &[f64]) -> f64 {
        self.eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, f)| (row.iter().zip(v).map(|(a, x)| a * x).sum::<f64>() - f).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn eq_matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        let e = DMatrix::from_fn(self.eq_rows.len(), self.num_vars, |r, c| self.eq_rows[r][c]);
        (e, DVector::from_column_slice(&self.eq_rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Margin `tau` used for strict inequalities: `M < 0` becomes `M <= -tau I`.
    pub strictness_margin: f64,
    pub feas_tol: f64,
    pub duality_gap_tol: f64,
    /// Budget of Newton steps across both phases.
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            strictness_margin: 1e-6,
            feas_tol: 1e-7,
            duality_gap_tol: 1e-7,
            max_iterations: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, x) in [
            ("strictness_margin", self.strictness_margin),
            ("feas_tol", self.feas_tol),
            ("duality_gap_tol", self.duality_gap_tol),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(format!("{name} must be positive, got {x}"));
            }
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub v: Vec<f64>,
    pub objective_value: f64,
    /// Largest eigenvalue of each block at `v`.
    pub block_slacks: Vec<f64>,
    pub equality_residual: f64,
    pub iterations: usize,
    /// Phase-I optimum bound; positive values certify infeasibility.
    pub phase1_value: Option<f64>,
}

/// Number of coordinates of a `dim x dim` symmetric matrix variable.
pub fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Symmetric matrix from its scaled upper-triangle coordinates: diagonal
/// entries are taken as-is, off-diagonal entries are divided by `sqrt(2)`,
/// which makes `svec` an isometry between the trace and Euclidean inner
/// products.
pub fn smat(dim: usize, coords: &[f64]) -> SymmetricMatrix {
    assert_eq!(coords.len(), svec_len(dim));
    let mut s = SymmetricMatrix::zeros(dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            let x = coords[k];
            s.set(i, j, if i == j { x } else { x / std::f64::consts::SQRT_2 });
            k += 1;
        }
    }
    s
}

/// Inverse of [`smat`].
pub fn svec(s: &SymmetricMatrix) -> Vec<f64> {
    let n = s.dim();
    let mut out = Vec::with_capacity(svec_len(n));
    for i in 0..n {
        for j in i..n {
            let x = s.get(i, j);
            out.push(if i == j { x } else { x * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Pluggable SDP backend.
pub trait SdpBackend {
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> SdpSolution;
}

/// Solves with the reference barrier method.
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> SdpSolution {
    BarrierSolver.solve(problem, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub block_slacks: Vec<f64>,
    pub equality_residual: f64,
    pub bounds_ok: bool,
}

/// Checks `M_j(v) <= (-tau + feas_tol) I` for every block, the equalities
/// within `feas_tol`, and the variable bounds.
pub fn check_feasible(problem: &SdpProblem, v: &[f64], config: &SolverConfig) -> FeasibilityReport {
    assert_eq!(v.len(), problem.num_vars, "decision vector length");
    let block_slacks: Vec<f64> = problem.blocks.iter().map(|b| b.max_eigenvalue(v)).collect();
    let equality_residual = problem.equality_residual(v);
    let bounds_ok = problem.bounds.iter().zip(v).all(|(b, &x)| {
        b.lower.is_none_or(|l| x >= l - config.feas_tol) && b.upper.is_none_or(|u| x <= u + config.feas_tol)
    });
    let limit = -config.strictness_margin + config.feas_tol;
    let feasible = bounds_ok && equality_residual <= config.feas_tol && block_slacks.iter().all(|&s| s <= limit);
    FeasibilityReport {
        feasible,
        block_slacks,
        equality_residual,
        bounds_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_matrix(&Matrix::from_rows(rows).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn validation_errors() {
        let mut p = SdpProblem::new(2);
        assert_eq!(p.validate(), Err(SdpError::NoBlocks));
        p.add_block(LmiBlock::new("b", SymmetricMatrix::identity(2)).with_term(3, SymmetricMatrix::identity(2)));
        assert!(matches!(p.validate(), Err(SdpError::VariableIndex { .. })));
        p.blocks[0].terms[0] = (0, SymmetricMatrix::identity(3));
        assert!(matches!(p.validate(), Err(SdpError::BlockDimension { .. })));
        p.blocks[0].terms[0] = (0, SymmetricMatrix::identity(2));
        p.add_equality(vec![1.0], 0.0);
        assert!(matches!(p.validate(), Err(SdpError::EqualityLength { .. })));
    }

    #[test]
    fn zero_point_with_positive_constant_is_infeasible() {
        let mut p = SdpProblem::new(1);
        p.add_block(LmiBlock::new("b", sym(&[&[1.0, 0.0], &[0.0, -1.0]])).with_term(0, SymmetricMatrix::identity(2)));
        let r = check_feasible(&p, &[0.0], &SolverConfig::default());
        assert!(!r.feasible);
        assert!((r.block_slacks[0] - 1.0).abs() < 1e-12);
        let r = check_feasible(&p, &[-2.0], &SolverConfig::default());
        assert!(r.feasible);
    }
}
