use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{check_feasible, SdpBackend, SdpProblem, SdpSolution, SdpStatus, SolverConfig};
use crate::linalg::sym_max_eigenvalue;

/// Log-determinant barrier method.
///
/// Equalities are eliminated onto the null space of `E`; feasibility is
/// decided by a phase-I program `min s` subject to `M_j(v) + tau I <= s I`
/// (with `s >= -1`), which stops as soon as a strictly feasible point is found
/// and declares the problem infeasible once its optimum is certified positive.
/// Phase II then follows the central path of
/// `t c'v - sum_j log det(-M_j(v) - tau I) - sum log(bound slacks)`
/// until the barrier duality gap `m / t` falls below the tolerance.
#[derive(Debug, Clone, Copy, Default)]
pub struct BarrierSolver;

const PATH_FACTOR: f64 = 10.0;
const CENTERING_TOL: f64 = 1e-10;
const MAX_PHASE1_S: f64 = 1.0;
const ROUNDING_FACTOR: f64 = 1e3;
const STALL_STEP: f64 = 1e-6;
const MAX_CENTERING_STEPS: usize = 50;

impl SdpBackend for BarrierSolver {
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> SdpSolution {
        if problem.validate().is_err() || config.validate().is_err() {
            return failure(
                problem,
                SdpStatus::NumericalFailure,
                vec![0.0; problem.num_vars],
                0,
                None,
            );
        }
        let reduced = match Reduction::new(problem, config) {
            Ok(r) => r,
            Err(v) => return failure(problem, SdpStatus::Infeasible, v, 0, None),
        };
        let mut budget = Budget {
            left: config.max_iterations,
            used: 0,
        };

        // phase I
        let phase1 = reduced.barrier.phase_one();
        let r = reduced.barrier.dim();
        let mut y1 = DVector::zeros(r + 1);
        y1[r] = reduced.barrier.initial_phase_one_s();
        let outcome = path_follow(&phase1, &mut y1, config.duality_gap_tol, &mut budget, |y, gap| {
            let s = y[r];
            if s < 0.0 {
                Some(PhaseOneStop::Feasible)
            } else if gap.is_some_and(|g| s - g > 0.0) {
                Some(PhaseOneStop::Infeasible)
            } else {
                None
            }
        });
        let s_final = y1[r];
        let y_start = y1.rows(0, r).into_owned();
        match outcome {
            PathOutcome::Stopped(PhaseOneStop::Feasible) => {}
            PathOutcome::Stopped(PhaseOneStop::Infeasible) | PathOutcome::Converged | PathOutcome::Stalled => {
                let status = if s_final < 0.0 {
                    SdpStatus::NumericalFailure
                } else {
                    SdpStatus::Infeasible
                };
                return failure(problem, status, reduced.lift(&y_start), budget.used, Some(s_final));
            }
            PathOutcome::Budget => {
                return failure(
                    problem,
                    SdpStatus::MaxIterations,
                    reduced.lift(&y_start),
                    budget.used,
                    Some(s_final),
                )
            }
            PathOutcome::Numerical => {
                return failure(
                    problem,
                    SdpStatus::NumericalFailure,
                    reduced.lift(&y_start),
                    budget.used,
                    Some(s_final),
                )
            }
        }

        // phase II
        let mut y = y_start;
        let status = if reduced.barrier.c.iter().all(|&x| x == 0.0) {
            SdpStatus::Optimal
        } else {
            match path_follow(&reduced.barrier, &mut y, config.duality_gap_tol, &mut budget, |_, _| {
                None::<()>
            }) {
                PathOutcome::Converged | PathOutcome::Stalled | PathOutcome::Stopped(()) => SdpStatus::Optimal,
                PathOutcome::Budget => SdpStatus::MaxIterations,
                PathOutcome::Numerical => SdpStatus::NumericalFailure,
            }
        };
        let v = reduced.lift(&y);
        let report = check_feasible(problem, &v, config);
        let status = if status == SdpStatus::Optimal && !report.feasible {
            SdpStatus::NumericalFailure
        } else {
            status
        };
        SdpSolution {
            status,
            objective_value: problem.objective_value(&v),
            block_slacks: report.block_slacks,
            equality_residual: report.equality_residual,
            v,
            iterations: budget.used,
            phase1_value: Some(s_final),
        }
    }
}

fn failure(
    problem: &SdpProblem,
    status: SdpStatus,
    v: Vec<f64>,
    iterations: usize,
    phase1: Option<f64>,
) -> SdpSolution {
    let (block_slacks, equality_residual) = if v.len() == problem.num_vars && problem.validate().is_ok() {
        (
            problem.blocks.iter().map(|b| b.max_eigenvalue(&v)).collect(),
            problem.equality_residual(&v),
        )
    } else {
        (Vec::new(), f64::NAN)
    };
    SdpSolution {
        status,
        objective_value: if v.len() == problem.num_vars {
            problem.objective_value(&v)
        } else {
            f64::NAN
        },
        v,
        block_slacks,
        equality_residual,
        iterations,
        phase1_value: phase1,
    }
}

enum PhaseOneStop {
    Feasible,
    Infeasible,
}

enum PathOutcome<S> {
    Converged,
    /// Newton steps shrank to rounding level before the gap target was met.
    Stalled,
    Stopped(S),
    Budget,
    Numerical,
}

struct Budget {
    left: usize,
    used: usize,
}

/// Barrier data over a reduced variable `y`:
/// matrix slacks `S_j(y) = -(F0_j + sum_k y_k F_jk)` and scalar slacks
/// `b_i - a_i'y`, all kept strictly positive.
#[derive(Clone)]
struct Barrier {
    blocks: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)>,
    lin: Vec<(DVector<f64>, f64)>,
    c: DVector<f64>,
}

impl Barrier {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn degree(&self) -> f64 {
        (self.blocks.iter().map(|(f0, _)| f0.nrows()).sum::<usize>() + self.lin.len()) as f64
    }

    fn block_slack(&self, j: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let (f0, fs) = &self.blocks[j];
        let mut m = -f0;
        for (k, f) in fs.iter().enumerate() {
            if y[k] != 0.0 {
                m -= f * y[k];
            }
        }
        m
    }

    fn lin_slack(&self, i: usize, y: &DVector<f64>) -> f64 {
        let (a, b) = &self.lin[i];
        b - a.dot(y)
    }

    /// Barrier value plus `t c'y`, or `None` outside the domain.
    fn value(&self, t: f64, y: &DVector<f64>) -> Option<f64> {
        let mut f = t * self.c.dot(y);
        for j in 0..self.blocks.len() {
            let chol = Cholesky::new(self.block_slack(j, y))?;
            f -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        for i in 0..self.lin.len() {
            let s = self.lin_slack(i, y);
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        f.is_finite().then_some(f)
    }

    /// Gradient, Hessian, and the scaled coefficient matrices
    /// `W_jk = L_j^{-1} F_jk L_j^{-T}` used for the step-length bound.
    #[allow(clippy::type_complexity)]
    fn derivatives(
        &self,
        t: f64,
        y: &DVector<f64>,
    ) -> Option<(DVector<f64>, DMatrix<f64>, Vec<Vec<DMatrix<f64>>>, Vec<f64>)> {
        let r = self.dim();
        let mut g = &self.c * t;
        let mut h = DMatrix::zeros(r, r);
        let mut scaled = Vec::with_capacity(self.blocks.len());
        for j in 0..self.blocks.len() {
            let chol: Cholesky<f64, Dyn> = Cholesky::new(self.block_slack(j, y))?;
            let l = chol.l();
            let mut ws = Vec::with_capacity(r);
            for f in &self.blocks[j].1 {
                let x = l.solve_lower_triangular(f)?;
                let w = l.solve_lower_triangular(&x.transpose())?;
                ws.push(w);
            }
            for k in 0..r {
                g[k] += ws[k].trace();
                for m in 0..=k {
                    let v = ws[k].dot(&ws[m]);
                    h[(k, m)] += v;
                    if m != k {
                        h[(m, k)] += v;
                    }
                }
            }
            scaled.push(ws);
        }
        let mut lin_slacks = Vec::with_capacity(self.lin.len());
        for i in 0..self.lin.len() {
            let s = self.lin_slack(i, y);
            if !(s > 0.0) {
                return None;
            }
            let a = &self.lin[i].0;
            g.axpy(1.0 / s, a, 1.0);
            h.ger(1.0 / (s * s), a, a, 1.0);
            lin_slacks.push(s);
        }
        Some((g, h, scaled, lin_slacks))
    }

    /// Phase-I program over `(y, s)`: every constraint is relaxed by `s`,
    /// with `s >= -MAX_PHASE1_S`, minimizing `s`.
    fn phase_one(&self) -> Barrier {
        let r = self.dim();
        let blocks = self
            .blocks
            .iter()
            .map(|(f0, fs)| {
                let mut fs = fs.clone();
                fs.push(-DMatrix::identity(f0.nrows(), f0.nrows()));
                (f0.clone(), fs)
            })
            .collect();
        let mut lin: Vec<(DVector<f64>, f64)> = self
            .lin
            .iter()
            .map(|(a, b)| {
                let mut a2 = DVector::zeros(r + 1);
                a2.rows_mut(0, r).copy_from(a);
                a2[r] = -1.0;
                (a2, *b)
            })
            .collect();
        let mut floor = DVector::zeros(r + 1);
        floor[r] = -1.0;
        lin.push((floor, MAX_PHASE1_S));
        let mut c = DVector::zeros(r + 1);
        c[r] = 1.0;
        Barrier { blocks, lin, c }
    }

    fn initial_phase_one_s(&self) -> f64 {
        let y = DVector::zeros(self.dim());
        let mut worst: f64 = 0.0;
        for j in 0..self.blocks.len() {
            worst = worst.max(sym_max_eigenvalue(&-self.block_slack(j, &y)));
        }
        for i in 0..self.lin.len() {
            worst = worst.max(-self.lin_slack(i, &y));
        }
        worst + 1.0
    }
}

/// Barrier central-path following from a strictly feasible `y`.
///
/// `stop` is consulted after every Newton step (with `None`) and after every
/// completed centering (with the current gap bound `m / t`).
fn path_follow<S>(
    barrier: &Barrier,
    y: &mut DVector<f64>,
    gap_tol: f64,
    budget: &mut Budget,
    mut stop: impl FnMut(&DVector<f64>, Option<f64>) -> Option<S>,
) -> PathOutcome<S> {
    let m = barrier.degree();
    let obj = barrier.c.dot(y);
    let mut t = (m / (1.0 + obj.abs())).max(1e-3);
    loop {
        match center(barrier, t, y, budget, &mut stop) {
            CenterOutcome::Centered => {}
            CenterOutcome::Stopped(s) => return PathOutcome::Stopped(s),
            CenterOutcome::Stalled => return PathOutcome::Stalled,
            CenterOutcome::Budget => return PathOutcome::Budget,
            CenterOutcome::Numerical => return PathOutcome::Numerical,
        }
        let gap = m / t;
        if let Some(s) = stop(y, Some(gap)) {
            return PathOutcome::Stopped(s);
        }
        if gap <= gap_tol {
            return PathOutcome::Converged;
        }
        t *= PATH_FACTOR;
    }
}

enum CenterOutcome<S> {
    Centered,
    Stalled,
    Stopped(S),
    Budget,
    Numerical,
}

fn center<S>(
    barrier: &Barrier,
    t: f64,
    y: &mut DVector<f64>,
    budget: &mut Budget,
    stop: &mut impl FnMut(&DVector<f64>, Option<f64>) -> Option<S>,
) -> CenterOutcome<S> {
    let mut steps = 0;
    loop {
        let Some((g, h, scaled, lin_slacks)) = barrier.derivatives(t, y) else {
            return CenterOutcome::Numerical;
        };
        let Some(step) = newton_direction(&h, &g) else {
            return CenterOutcome::Numerical;
        };
        let decrement = -g.dot(&step);
        if !decrement.is_finite() {
            return CenterOutcome::Numerical;
        }
        let Some(f0) = barrier.value(t, y) else {
            return CenterOutcome::Numerical;
        };
        // below this the decrement is dominated by rounding in the barrier value
        let floor = ROUNDING_FACTOR * f64::EPSILON * f0.abs();
        if decrement / 2.0 <= CENTERING_TOL.max(floor) {
            return CenterOutcome::Centered;
        }
        if budget.left == 0 {
            return CenterOutcome::Budget;
        }

        let alpha_max = max_step(barrier, &step, &scaled, &lin_slacks);
        let mut alpha = if alpha_max.is_finite() {
            (0.99 * alpha_max).min(1.0)
        } else {
            1.0
        };
        let slope = g.dot(&step);
        let mut accepted = false;
        while alpha > 1e-14 {
            let trial = &*y + &step * alpha;
            if let Some(f) = barrier.value(t, &trial) {
                if f <= f0 + 0.01 * alpha * slope {
                    *y = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        budget.left -= 1;
        budget.used += 1;
        if !accepted {
            // no further decrease is representable at this t
            return if decrement < 1e-4 {
                CenterOutcome::Centered
            } else {
                CenterOutcome::Numerical
            };
        }
        if let Some(s) = stop(y, None) {
            return CenterOutcome::Stopped(s);
        }
        steps += 1;
        if (alpha < STALL_STEP || steps >= MAX_CENTERING_STEPS) && decrement < 1e-4 {
            // rounding dominates the barrier value; the point is as centered as it gets
            return CenterOutcome::Centered;
        }
        if alpha < STALL_STEP {
            return CenterOutcome::Stalled;
        }
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    // symmetric diagonal scaling keeps badly scaled variables from ruining the factorization
    let d: DVector<f64> = h.diagonal().map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 });
    let hs = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * d[i] * d[j]);
    let gs = g.component_mul(&d);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut hr = hs.clone();
        if reg > 0.0 {
            for i in 0..hr.nrows() {
                hr[(i, i)] += reg;
            }
        }
        if let Some(chol) = Cholesky::new(hr) {
            let z = chol.solve(&(-&gs));
            if z.iter().all(|x| x.is_finite()) {
                return Some(z.component_mul(&d));
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

fn max_step(barrier: &Barrier, step: &DVector<f64>, scaled: &[Vec<DMatrix<f64>>], lin_slacks: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for ((f0, _), ws) in barrier.blocks.iter().zip(scaled) {
        let d = f0.nrows();
        let mut dw = DMatrix::zeros(d, d);
        for (k, w) in ws.iter().enumerate() {
            if step[k] != 0.0 {
                dw += w * step[k];
            }
        }
        let lmax = sym_max_eigenvalue(&dw);
        if lmax > 0.0 {
            alpha = alpha.min(1.0 / lmax);
        }
    }
    for (i, (a, _)) in barrier.lin.iter().enumerate() {
        let rate = a.dot(step);
        if rate > 0.0 {
            alpha = alpha.min(lin_slacks[i] / rate);
        }
    }
    alpha
}

/// The problem restated over `y`, with `v = v0 + Z y` spanning the
/// solution set of the equalities.
struct Reduction {
    v0: DVector<f64>,
    z: DMatrix<f64>,
    barrier: Barrier,
}

impl Reduction {
    /// Fails with the least-norm point when the equalities (or bounds of
    /// variables they pin down) cannot be met.
    fn new(problem: &SdpProblem, config: &SolverConfig) -> Result<Self, Vec<f64>> {
        let n = problem.num_vars;
        let (v0, z) = if problem.eq_rows.is_empty() {
            (DVector::zeros(n), DMatrix::identity(n, n))
        } else {
            let (e, f) = problem.eq_matrix();
            let rows = e.nrows().max(n);
            let mut padded = DMatrix::zeros(rows, n);
            padded.rows_mut(0, e.nrows()).copy_from(&e);
            let mut rhs = DVector::zeros(rows);
            rhs.rows_mut(0, f.len()).copy_from(&f);
            let svd = padded.svd(true, true);
            let smax = svd.singular_values.max();
            let tol = 1e-12 * smax.max(1.0);
            let v0 = svd.solve(&rhs, tol).map_err(|_| Vec::new())?;
            let vt = svd.v_t.as_ref().ok_or_else(Vec::new)?;
            let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= tol).collect();
            let mut z = DMatrix::zeros(n, null.len());
            for (c, &i) in null.iter().enumerate() {
                z.set_column(c, &vt.row(i).transpose());
            }
            if (&e * &v0 - &f).amax() > config.feas_tol {
                return Err(v0.iter().copied().collect());
            }
            (v0, z)
        };
        let r = z.ncols();
        let tau = config.strictness_margin;

        let mut blocks = Vec::with_capacity(problem.blocks.len());
        for block in &problem.blocks {
            let d = block.dim();
            let mut f0 = block.evaluate(v0.as_slice());
            for i in 0..d {
                f0[(i, i)] += tau;
            }
            let dense: Vec<(usize, DMatrix<f64>)> = block.terms.iter().map(|(i, f)| (*i, f.to_dmatrix())).collect();
            let fs = (0..r)
                .map(|k| {
                    let mut fk = DMatrix::zeros(d, d);
                    for (i, f) in &dense {
                        let w = z[(*i, k)];
                        if w != 0.0 {
                            fk += f * w;
                        }
                    }
                    fk
                })
                .collect();
            blocks.push((f0, fs));
        }

        let mut lin = Vec::new();
        for (i, b) in problem.bounds.iter().enumerate() {
            let row: DVector<f64> = z.row(i).transpose();
            let pinned = row.amax() <= 1e-14;
            if let Some(u) = b.upper {
                if pinned {
                    if v0[i] > u {
                        return Err(v0.iter().copied().collect());
                    }
                } else {
                    lin.push((row.clone(), u - v0[i]));
                }
            }
            if let Some(l) = b.lower {
                if pinned {
                    if v0[i] < l {
                        return Err(v0.iter().copied().collect());
                    }
                } else {
                    lin.push((-row.clone(), v0[i] - l));
                }
            }
        }
        let c_full = DVector::from_column_slice(&problem.objective);
        let c = z.transpose() * c_full;
        Ok(Reduction {
            v0,
            z,
            barrier: Barrier { blocks, lin, c },
        })
    }

    fn lift(&self, y: &DVector<f64>) -> Vec<f64> {
        (&self.v0 + &self.z * y).iter().copied().collect()
    }
}
