//! Construction and solution of the analysis and synthesis programs, and
//! recovery of the static output feedback gain `u = K y`.
//!
//! Four programs are available:
//!
//! - [`Method::Lemma3Analysis`]: admissible Lipschitz constant of an
//!   autonomous uncertain system ([`AutonomousSystem`]).
//! - [`Method::Theorem1`]: synthesis through `G = P B1 K` with
//!   `K = B1' Kbar`; the gain exists only when `vec(G)` lies in the range of
//!   `I (x) P B1 B1'`.
//! - [`Method::Corollary1`]: synthesis through `P B1 = B1 Q` and `G = Q K`,
//!   which always yields `K = Q^{-1} G`.
//! - [`Method::Corollary2`]: as `Corollary1`, with a matrix-valued
//!   Lipschitz bound maximized entrywise against weights `c_ij`.
//!
//! Strict inequalities are imposed with the solver's strictness margin.

mod gain;
mod lmi;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gain::{solve_gain_kronecker, transform_feedthrough, KroneckerSolution, GAIN_RANK_TOL};

use crate::linalg::{spectral_norm, Matrix, SymmetricMatrix};
use crate::sdp::{self, SdpProblem, SdpStatus, SolverConfig};
use crate::system::UncertainSystem;
use lmi::{Plant, Program, Vars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lemma3Analysis,
    Theorem1,
    Corollary1,
    Corollary2,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lemma3" | "lemma3_analysis" => Ok(Method::Lemma3Analysis),
            "theorem1" => Ok(Method::Theorem1),
            "corollary1" => Ok(Method::Corollary1),
            "corollary2" => Ok(Method::Corollary2),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// Attenuation level: a fixed `mu`, or `zeta = mu^2` as a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    Fixed(f64),
    Optimize,
}

/// Lipschitz constant: maximized through `alpha = 1/gamma^2`, or fixed,
/// which turns the problem into a feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Maximize,
    Fixed(f64),
}

/// Newton-step budget for synthesis requests. The gain programs slide along
/// curved parts of the boundary during centering and can need a few hundred steps.
pub const SYNTHESIS_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRequest {
    pub method: Method,
    pub mu_mode: MuMode,
    pub gamma_mode: GammaMode,
    /// Weight of `alpha + eps1` (or `eps1 - omega`) in the objective.
    pub w1: f64,
    /// Weight of `zeta = mu^2` when `mu` is optimized.
    pub w2: f64,
    /// Entrywise weights `c_ij > 0` of the matrix-valued bound.
    pub weights: Option<Matrix>,
    /// Adds `P <= (1 - tau) I`; the Lyapunov argument behind the programs
    /// uses `P < I`, which the block inequalities alone do not enforce.
    pub bound_p: bool,
    pub solver: SolverConfig,
}

impl SynthesisRequest {
    /// Maximize the Lipschitz constant at a fixed attenuation level `mu`.
    pub fn new(method: Method, mu: f64) -> Self {
        SynthesisRequest {
            method,
            mu_mode: MuMode::Fixed(mu),
            gamma_mode: GammaMode::Maximize,
            w1: 1.0,
            w2: 1.0,
            weights: None,
            bound_p: true,
            solver: SolverConfig {
                max_iterations: SYNTHESIS_MAX_ITERATIONS,
                ..SolverConfig::default()
            },
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma_mode = GammaMode::Fixed(gamma);
        self
    }

    pub fn with_bound_p(mut self, on: bool) -> Self {
        self.bound_p = on;
        self
    }

    pub fn with_weights(mut self, c: Matrix) -> Self {
        self.weights = Some(c);
        self
    }

    pub fn validate(&self, n: usize) -> Result<(), SynthesisError> {
        let bad = |msg: String| Err(SynthesisError::InvalidRequest(msg));
        match self.mu_mode {
            MuMode::Fixed(mu) if !(mu > 0.0 && mu.is_finite()) => return bad(format!("mu must be positive, got {mu}")),
            MuMode::Optimize if !(self.w2 > 0.0 && self.w2.is_finite()) => {
                return Err(SynthesisError::Unbounded(format!(
                    "mu is optimized but its weight w2 = {} is not positive",
                    self.w2
                )))
            }
            _ => {}
        }
        match self.gamma_mode {
            GammaMode::Fixed(g) if !(g >= 0.0 && g.is_finite()) => {
                return bad(format!("fixed gamma must be finite and nonnegative, got {g}"))
            }
            GammaMode::Maximize if !(self.w1 > 0.0 && self.w1.is_finite()) => {
                return Err(SynthesisError::Unbounded(format!(
                    "gamma is maximized but its weight w1 = {} is not positive",
                    self.w1
                )))
            }
            _ => {}
        }
        if self.method == Method::Corollary2 {
            if !matches!(self.mu_mode, MuMode::Fixed(_)) {
                return bad("the matrix-valued bound requires a fixed mu".into());
            }
            if self.gamma_mode != GammaMode::Maximize {
                return bad("the matrix-valued bound is always maximized".into());
            }
            match &self.weights {
                None => return bad("weights c_ij are required".into()),
                Some(c) if c.shape() != (n, n) => return bad(format!("weights must be {n}x{n}")),
                Some(c) if c.as_slice().iter().any(|&x| x <= 0.0) => return bad("weights must be positive".into()),
                _ => {}
            }
        }
        self.solver.validate().map_err(SynthesisError::InvalidRequest)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unbounded objective: {0}")]
    Unbounded(String),
}

/// How the gain was obtained from the certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainRecovery {
    Exact,
    /// The linear equation for `Kbar` was inconsistent; `K` is its
    /// least-squares solution and carries no certificate.
    LeastSquares {
        residual: f64,
    },
    Failed {
        reason: String,
    },
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub label: String,
    /// Largest eigenvalue of the block rebuilt from the returned matrices.
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver_status: SdpStatus,
    pub iterations: usize,
    pub objective_value: f64,
    pub phase1_value: Option<f64>,
    pub num_vars: usize,
    pub num_equalities: usize,
    pub block_sizes: Vec<usize>,
    pub blocks: Vec<BlockReport>,
    /// `max |P B1 - B1 Q|`, for the programs with that equality.
    pub equality_residual: Option<f64>,
    pub gain_residual: Option<f64>,
    pub q_min_singular_value: Option<f64>,
    pub p_min_eigenvalue: Option<f64>,
    /// Every rebuilt block satisfies `<= -tau + feas_tol`.
    pub certificate_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub method: Method,
    pub status: SdpStatus,
    pub p: Option<SymmetricMatrix>,
    pub g: Option<Matrix>,
    pub q: Option<Matrix>,
    pub alpha_star: Option<f64>,
    pub eps1_star: Option<f64>,
    pub eps2: Option<f64>,
    /// `1 / sqrt(alpha (1 + eps1))` when the Lipschitz constant is maximized.
    pub gamma_star: Option<f64>,
    /// The Lipschitz constant tested in fixed-gamma mode.
    pub gamma_fixed: Option<f64>,
    pub mu: Option<f64>,
    pub k: Option<Matrix>,
    pub kbar: Option<Matrix>,
    pub gain_recovery: GainRecovery,
    pub rank_condition_holds: Option<bool>,
    /// Matrix-valued bound `Gamma* = A_cal / sqrt(1 + eps1)`.
    pub gamma_matrix: Option<Matrix>,
    pub a_cal: Option<Matrix>,
    pub omega: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }
}

/// Uncertain system without input and measurement:
/// `x(k+1) = (A + M1 F N) x + Phi(x) + B w`, `z = H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutonomousSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub h: Matrix,
    pub m1: Matrix,
    pub n: Matrix,
}

impl AutonomousSystem {
    /// The plant with `u = 0`.
    pub fn open_loop(sys: &UncertainSystem) -> Self {
        AutonomousSystem {
            a: sys.a.clone(),
            b: sys.b2.clone(),
            h: sys.h.clone(),
            m1: sys.m1.clone(),
            n: sys.n.clone(),
        }
    }

    /// The plant under `u = K y`: `A + B1 K C`, `B2 + B1 K D`, `M1 + B1 K M2`.
    pub fn closed_loop(sys: &UncertainSystem, k: &Matrix) -> Result<Self, SynthesisError> {
        let (m, p) = (sys.dims.m, sys.dims.p);
        if k.shape() != (m, p) {
            return Err(SynthesisError::InvalidRequest(format!(
                "gain must be {m}x{p}, got {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        let bk = &sys.b1 * k;
        Ok(AutonomousSystem {
            a: &sys.a + &(&bk * &sys.c),
            b: &sys.b2 + &(&bk * &sys.d),
            h: sys.h.clone(),
            m1: &sys.m1 + &(&bk * &sys.m2),
            n: sys.n.clone(),
        })
    }

    fn validate(&self) -> Result<(), SynthesisError> {
        let n = self.a.rows();
        let ok = self.a.cols() == n
            && self.b.rows() == n
            && self.h.cols() == n
            && self.m1.rows() == n
            && self.n.cols() == n
            && self.n.rows() == self.m1.cols();
        if ok {
            Ok(())
        } else {
            Err(SynthesisError::InvalidRequest(
                "inconsistent autonomous system dimensions".into(),
            ))
        }
    }
}

fn plant_of(sys: &UncertainSystem) -> Plant {
    Plant {
        a: sys.a.as_dmatrix().clone(),
        b1: sys.b1.as_dmatrix().clone(),
        b2: sys.b2.as_dmatrix().clone(),
        c: sys.c.as_dmatrix().clone(),
        d: sys.d.as_dmatrix().clone(),
        h: sys.h.as_dmatrix().clone(),
        m1: sys.m1.as_dmatrix().clone(),
        m2: sys.m2.as_dmatrix().clone(),
        n: sys.n.as_dmatrix().clone(),
    }
}

fn plant_of_autonomous(sys: &AutonomousSystem) -> Plant {
    let nx = sys.a.rows();
    Plant {
        a: sys.a.as_dmatrix().clone(),
        b1: DMatrix::zeros(nx, 0),
        b2: sys.b.as_dmatrix().clone(),
        c: DMatrix::zeros(0, nx),
        d: DMatrix::zeros(0, sys.b.cols()),
        h: sys.h.as_dmatrix().clone(),
        m1: sys.m1.as_dmatrix().clone(),
        m2: DMatrix::zeros(0, sys.m1.cols()),
        n: sys.n.as_dmatrix().clone(),
    }
}

fn expect_method(req: &SynthesisRequest, method: Method) -> Result<(), SynthesisError> {
    if req.method == method {
        Ok(())
    } else {
        Err(SynthesisError::InvalidRequest(format!(
            "request is for {:?}, called {:?}",
            req.method, method
        )))
    }
}

/// The canonical program a request lowers to, for inspection or export.
pub fn lower(sys: &UncertainSystem, req: &SynthesisRequest) -> Result<SdpProblem, SynthesisError> {
    req.validate(sys.dims.n)?;
    let plant = if req.method == Method::Lemma3Analysis {
        plant_of_autonomous(&AutonomousSystem::open_loop(sys))
    } else {
        plant_of(sys)
    };
    Ok(Program::build(req.method, &plant, req).lower(req))
}

/// Dispatches on `req.method`; the analysis program is applied to the open loop.
pub fn synthesize(sys: &UncertainSystem, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
    match req.method {
        Method::Lemma3Analysis => analyze_lemma3(&AutonomousSystem::open_loop(sys), req),
        Method::Theorem1 => synth_theorem1(sys, req),
        Method::Corollary1 => synth_corollary1(sys, req),
        Method::Corollary2 => synth_corollary2(sys, req),
    }
}

/// Largest Lipschitz constant for which the autonomous system is certified
/// robustly stable with attenuation `mu`.
pub fn analyze_lemma3(sys: &AutonomousSystem, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
    expect_method(req, Method::Lemma3Analysis)?;
    sys.validate()?;
    req.validate(sys.a.rows())?;
    Ok(run(&plant_of_autonomous(sys), req, |_, _| Recovered::none()))
}

/// Synthesis with `G = P B1 K`, `K = B1' Kbar`.
pub fn synth_theorem1(sys: &UncertainSystem, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
    expect_method(req, Method::Theorem1)?;
    req.validate(sys.dims.n)?;
    Ok(run(&plant_of(sys), req, |vars, p| {
        let g = Matrix::wrap(vars.g.clone());
        match solve_gain_kronecker(p, &sys.b1, &g) {
            Ok(sol) => {
                let k = &sys.b1.transpose() * &sol.kbar;
                Recovered {
                    k: Some(k),
                    kbar: Some(sol.kbar),
                    recovery: if sol.rank_condition {
                        GainRecovery::Exact
                    } else {
                        GainRecovery::LeastSquares { residual: sol.residual }
                    },
                    rank_condition: Some(sol.rank_condition),
                    gain_residual: Some(sol.residual),
                }
            }
            Err(e) => Recovered::failed(e.to_string()),
        }
    }))
}

fn gain_from_q(vars: &Vars) -> Recovered {
    let q = Matrix::wrap(vars.q.clone());
    if q.min_singular_value() <= 1e-9 {
        return Recovered::failed("Q is singular".into());
    }
    match q.solve(&Matrix::wrap(vars.g.clone())) {
        Ok(k) => Recovered {
            gain_residual: Some(spectral_norm(&(&(&q * &k) - &Matrix::wrap(vars.g.clone())))),
            k: Some(k),
            kbar: None,
            recovery: GainRecovery::Exact,
            rank_condition: None,
        },
        Err(e) => Recovered::failed(e.to_string()),
    }
}

/// Synthesis with `P B1 = B1 Q` and `K = Q^{-1} G`.
pub fn synth_corollary1(sys: &UncertainSystem, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
    expect_method(req, Method::Corollary1)?;
    req.validate(sys.dims.n)?;
    Ok(run(&plant_of(sys), req, |vars, _| gain_from_q(vars)))
}

/// Synthesis maximizing a matrix-valued Lipschitz bound against weights `c_ij`.
pub fn synth_corollary2(sys: &UncertainSystem, req: &SynthesisRequest) -> Result<SynthesisResult, SynthesisError> {
    expect_method(req, Method::Corollary2)?;
    req.validate(sys.dims.n)?;
    Ok(run(&plant_of(sys), req, |vars, _| gain_from_q(vars)))
}

struct Recovered {
    k: Option<Matrix>,
    kbar: Option<Matrix>,
    recovery: GainRecovery,
    rank_condition: Option<bool>,
    gain_residual: Option<f64>,
}

impl Recovered {
    fn none() -> Self {
        Recovered {
            k: None,
            kbar: None,
            recovery: GainRecovery::NotApplicable,
            rank_condition: None,
            gain_residual: None,
        }
    }

    fn failed(reason: String) -> Self {
        Recovered {
            recovery: GainRecovery::Failed { reason },
            ..Recovered::none()
        }
    }
}

fn run(
    plant: &Plant,
    req: &SynthesisRequest,
    recover: impl FnOnce(&Vars, &SymmetricMatrix) -> Recovered,
) -> SynthesisResult {
    let program = Program::build(req.method, plant, req);
    let problem = program.lower(req);
    let sol = sdp::solve(&problem, &req.solver);
    let layout = &program.layout;
    let vars = layout.decode(&sol.v, req);
    let feasible = sol.status == SdpStatus::Optimal;

    let blocks: Vec<BlockReport> = program
        .evaluate(&vars)
        .into_iter()
        .map(|(label, max_eigenvalue)| BlockReport { label, max_eigenvalue })
        .collect();
    let limit = -req.solver.strictness_margin + req.solver.feas_tol;
    let equality_residual = program.equality_residual(&vars);
    let certificate_valid =
        blocks.iter().all(|b| b.max_eigenvalue <= limit) && equality_residual.is_none_or(|r| r <= req.solver.feas_tol);

    let p = SymmetricMatrix::from_dmatrix_sym(&vars.p);
    let rec = if feasible {
        recover(&vars, &p)
    } else {
        Recovered::none()
    };
    let has_q = layout.q.is_some();
    let alpha = layout.alpha.map(|_| vars.alpha);
    let gamma_star = match (req.gamma_mode, alpha) {
        (GammaMode::Maximize, Some(a)) if feasible => Some(1.0 / (a * (1.0 + vars.eps1)).sqrt()),
        _ => None,
    };
    let (a_cal, gamma_matrix) = if layout.acal.is_some() && feasible {
        let a = Matrix::wrap(vars.acal.clone());
        let g = a.scale(1.0 / (1.0 + vars.eps1).sqrt());
        (Some(a), Some(g))
    } else {
        (None, None)
    };

    let when = |x: bool| feasible && x;
    SynthesisResult {
        method: req.method,
        status: sol.status,
        p: feasible.then(|| p.clone()),
        g: when(layout.g.is_some()).then(|| Matrix::wrap(vars.g.clone())),
        q: when(has_q).then(|| Matrix::wrap(vars.q.clone())),
        alpha_star: alpha.filter(|_| feasible),
        eps1_star: feasible.then_some(vars.eps1),
        eps2: feasible.then_some(vars.eps2),
        gamma_star,
        gamma_fixed: match req.gamma_mode {
            GammaMode::Fixed(g) => Some(g),
            GammaMode::Maximize => None,
        },
        mu: match req.mu_mode {
            MuMode::Fixed(mu) => Some(mu),
            MuMode::Optimize => feasible.then(|| vars.zeta.sqrt()),
        },
        k: rec.k,
        kbar: rec.kbar,
        gain_recovery: rec.recovery,
        rank_condition_holds: rec.rank_condition,
        gamma_matrix,
        a_cal,
        omega: layout.omega.filter(|_| feasible).map(|_| vars.omega),
        diagnostics: Diagnostics {
            solver_status: sol.status,
            iterations: sol.iterations,
            objective_value: sol.objective_value,
            phase1_value: sol.phase1_value,
            num_vars: problem.num_vars,
            num_equalities: problem.eq_rows.len(),
            block_sizes: problem.blocks.iter().map(|b| b.dim()).collect(),
            blocks,
            equality_residual,
            gain_residual: rec.gain_residual,
            q_min_singular_value: when(has_q).then(|| Matrix::wrap(vars.q.clone()).min_singular_value()),
            p_min_eigenvalue: feasible.then(|| p.min_eigenvalue()),
            certificate_valid: feasible && certificate_valid,
        },
    }
}
