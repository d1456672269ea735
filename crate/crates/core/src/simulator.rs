//! Closed-loop rollouts of the uncertain plant under `u = K y`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{spectral_norm, Matrix, SymmetricMatrix};
use crate::system::{
    evaluate_nonlinearity, DisturbanceSignal, NonlinearityDescriptor, UncertainSystem, UncertaintySignal,
};

/// State norm above which a rollout is abandoned.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("state norm exceeded {limit:e} at step {step}")]
    Diverged {
        step: usize,
        limit: f64,
        partial: Box<Trajectory>,
    },
    #[error("disturbance {index} has zero energy over the horizon")]
    ZeroEnergy { index: usize },
}

/// One time step of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub k: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// `x' P x`, when a Lyapunov matrix was supplied.
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub horizon: usize,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        &self.records.last().expect("trajectories hold the initial state").x
    }

    /// CSV with header `k,x1..,u1..,y1..,z1..,w1..,V` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.records.first() else {
            return String::new();
        };
        let mut header = vec!["k".to_string()];
        for (name, len) in [
            ("x", first.x.len()),
            ("u", first.u.len()),
            ("y", first.y.len()),
            ("z", first.z.len()),
            ("w", first.w.len()),
        ] {
            header.extend((1..=len).map(|i| format!("{name}{i}")));
        }
        header.push("V".into());
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.k);
            for v in r.x.iter().chain(&r.u).chain(&r.y).chain(&r.z).chain(&r.w) {
                let _ = write!(out, ",{v:.16e}");
            }
            match r.v {
                Some(v) => {
                    let _ = writeln!(out, ",{v:.16e}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

fn check_dims(
    sys: &UncertainSystem,
    k: &Matrix,
    phi: &NonlinearityDescriptor,
    x0: &[f64],
) -> Result<(), SimulationError> {
    let d = sys.dims;
    if k.shape() != (d.m, d.p) {
        return Err(SimulationError::Dimension(format!(
            "gain is {}x{}, expected {}x{}",
            k.rows(),
            k.cols(),
            d.m,
            d.p
        )));
    }
    if x0.len() != d.n {
        return Err(SimulationError::Dimension(format!(
            "x0 has {} entries, expected {}",
            x0.len(),
            d.n
        )));
    }
    if let Some(n) = phi.state_dim() {
        if n != d.n {
            return Err(SimulationError::Dimension(format!(
                "nonlinearity acts on {n} states, expected {}",
                d.n
            )));
        }
    }
    Ok(())
}

struct Step {
    y: DVector<f64>,
    u: DVector<f64>,
    next: DVector<f64>,
}

fn step(
    sys: &UncertainSystem,
    k: &DMatrix<f64>,
    phi: &NonlinearityDescriptor,
    f: &DMatrix<f64>,
    x: &DVector<f64>,
    w: &DVector<f64>,
) -> Step {
    let fnx = f * (sys.n.as_dmatrix() * x);
    let y = sys.c.as_dmatrix() * x + sys.m2.as_dmatrix() * &fnx + sys.d.as_dmatrix() * w;
    let u = k * &y;
    let phi_x = DVector::from_vec(evaluate_nonlinearity(phi, x.as_slice(), u.as_slice()));
    let next = sys.a.as_dmatrix() * x
        + sys.m1.as_dmatrix() * &fnx
        + phi_x
        + sys.b1.as_dmatrix() * &u
        + sys.b2.as_dmatrix() * w;
    Step { y, u, next }
}

/// Rolls the closed loop forward `horizon` steps from `x0`.
///
/// The trajectory holds `horizon + 1` records; record `k` has the state
/// `x(k)` and the signals evaluated at that step.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    sys: &UncertainSystem,
    k: &Matrix,
    phi: &NonlinearityDescriptor,
    f: &UncertaintySignal,
    w: &DisturbanceSignal,
    x0: &[f64],
    horizon: usize,
    p: Option<&SymmetricMatrix>,
) -> Result<Trajectory, SimulationError> {
    if horizon == 0 {
        return Err(SimulationError::Invalid("horizon must be at least 1".into()));
    }
    check_dims(sys, k, phi, x0)?;
    f.validate(sys.dims.q)
        .map_err(|e| SimulationError::Invalid(e.to_string()))?;
    w.validate(sys.dims.d)
        .map_err(|e| SimulationError::Invalid(e.to_string()))?;
    if let Some(p) = p {
        if p.dim() != sys.dims.n {
            return Err(SimulationError::Dimension(format!(
                "P is {0}x{0}, expected {1}x{1}",
                p.dim(),
                sys.dims.n
            )));
        }
    }
    let pm = p.map(|p| p.to_dmatrix());
    let km = k.as_dmatrix();
    let mut x = DVector::from_column_slice(x0);
    let mut records = Vec::with_capacity(horizon + 1);
    for kk in 0..=horizon {
        let fk = f.at(sys.dims.q, kk);
        let wk = DVector::from_vec(w.at(sys.dims.d, kk));
        let s = step(sys, km, phi, &fk, &x, &wk);
        records.push(Record {
            k: kk,
            x: x.as_slice().to_vec(),
            u: s.u.as_slice().to_vec(),
            y: s.y.as_slice().to_vec(),
            z: (sys.h.as_dmatrix() * &x).as_slice().to_vec(),
            w: wk.as_slice().to_vec(),
            v: pm.as_ref().map(|p| x.dot(&(p * &x))),
        });
        if kk < horizon {
            x = s.next;
            if !(x.norm() <= DIVERGENCE_LIMIT) {
                return Err(SimulationError::Diverged {
                    step: kk + 1,
                    limit: DIVERGENCE_LIMIT,
                    partial: Box::new(Trajectory { horizon, records }),
                });
            }
        }
    }
    Ok(Trajectory { horizon, records })
}

/// Largest deviation between recorded successor states and the model
/// equations re-evaluated from each record.
pub fn dynamics_residual(
    sys: &UncertainSystem,
    k: &Matrix,
    phi: &NonlinearityDescriptor,
    f: &UncertaintySignal,
    traj: &Trajectory,
) -> f64 {
    traj.records
        .windows(2)
        .map(|pair| {
            let x = DVector::from_column_slice(&pair[0].x);
            let w = DVector::from_column_slice(&pair[0].w);
            let s = step(sys, k.as_dmatrix(), phi, &f.at(sys.dims.q, pair[0].k), &x, &w);
            (s.next - DVector::from_column_slice(&pair[1].x)).amax()
        })
        .fold(0.0, f64::max)
}

fn energy<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> f64 {
    rows.map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum()
}

/// Worst ratio `|z| / |w|` over an ensemble of disturbances, from `x0 = 0`.
pub fn empirical_l2_gain(
    sys: &UncertainSystem,
    k: &Matrix,
    phi: &NonlinearityDescriptor,
    f: &UncertaintySignal,
    ensemble: &[DisturbanceSignal],
    horizon: usize,
) -> Result<f64, SimulationError> {
    let x0 = vec![0.0; sys.dims.n];
    let mut worst: f64 = 0.0;
    for (index, w) in ensemble.iter().enumerate() {
        let traj = simulate(sys, k, phi, f, w, &x0, horizon, None)?;
        let ew = energy(traj.records.iter().map(|r| &r.w));
        if ew == 0.0 {
            return Err(SimulationError::ZeroEnergy { index });
        }
        let ez = energy(traj.records.iter().map(|r| &r.z));
        worst = worst.max((ez / ew).sqrt());
    }
    Ok(worst)
}

/// `sum_k z'z - mu^2 w'w` along a trajectory; nonpositive when the
/// attenuation bound holds.
pub fn dissipation(traj: &Trajectory, mu: f64) -> f64 {
    energy(traj.records.iter().map(|r| &r.z)) - mu * mu * energy(traj.records.iter().map(|r| &r.w))
}

/// Whether `V(k+1) < V(k)` at every step where `|x(k)| > tolerance`;
/// returns the first violating step otherwise.
pub fn lyapunov_decrement_check(traj: &Trajectory, tolerance: f64) -> (bool, Option<usize>) {
    for pair in traj.records.windows(2) {
        let norm = pair[0].x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= tolerance {
            continue;
        }
        match (pair[0].v, pair[1].v) {
            (Some(a), Some(b)) if b < a => {}
            _ => return (false, Some(pair[0].k)),
        }
    }
    (true, None)
}

/// Uniform point on the sphere of radius `r`.
pub fn random_on_sphere(rng: &mut impl Rng, n: usize, r: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| r * x / norm).collect()
}

/// Exact Lipschitz constant of `Phi_i(x) = a_i sin(x_{s_i})`: the spectral
/// norm of the matrix with entry `a_i` at `(i, s_i)`, attained at `x = 0`.
pub fn sinusoid_lipschitz(coefficients: &[f64], sources: &[usize]) -> f64 {
    let n = coefficients.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, (&a, &s)) in coefficients.iter().zip(sources).enumerate() {
        m[(i, s)] += a;
    }
    spectral_norm(&Matrix::wrap(m))
}

/// Random coordinate-sinusoid perturbation whose Lipschitz constant equals
/// `lipschitz` exactly.
pub fn random_sinusoid_perturbation(rng: &mut impl Rng, n: usize, lipschitz: f64) -> NonlinearityDescriptor {
    let sources: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = sinusoid_lipschitz(&raw, &sources);
    let coefficients = if norm > 0.0 && lipschitz > 0.0 {
        raw.iter().map(|a| a * lipschitz / norm).collect()
    } else {
        vec![0.0; n]
    };
    NonlinearityDescriptor::coordinate_sinusoid(coefficients, sources, lipschitz).expect("sources are in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub horizon: usize,
    /// A run converges when `|x(horizon)| <= threshold |x0|`.
    pub threshold: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            horizon: 200,
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub stable: usize,
    pub fraction_stable: f64,
    /// `|x(horizon)| / |x0|` for each trial, in trial order.
    pub final_ratios: Vec<f64>,
}

/// Fraction of trials that converge when `base_phi` is perturbed by a random
/// additive nonlinearity of Lipschitz constant `perturbation_lipschitz`.
///
/// Trial `i` draws its perturbation, initial state (unit norm) and
/// uncertainty seed from the ChaCha stream `i` of `seed`, so results do not
/// depend on how trials are spread over threads.
pub fn monte_carlo_robustness(
    sys: &UncertainSystem,
    k: &Matrix,
    base_phi: &NonlinearityDescriptor,
    perturbation_lipschitz: f64,
    trials: usize,
    seed: u64,
    config: MonteCarloConfig,
) -> Result<MonteCarloReport, SimulationError> {
    if !(perturbation_lipschitz >= 0.0) {
        return Err(SimulationError::Invalid(
            "perturbation Lipschitz constant must be nonnegative".into(),
        ));
    }
    check_dims(sys, k, base_phi, &vec![0.0; sys.dims.n])?;
    let run = |i: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let delta = random_sinusoid_perturbation(&mut rng, sys.dims.n, perturbation_lipschitz);
        let phi = base_phi.plus(&delta);
        let x0 = random_on_sphere(&mut rng, sys.dims.n, 1.0);
        let f = UncertaintySignal::RandomSwitching { seed: rng.random() };
        match simulate(sys, k, &phi, &f, &DisturbanceSignal::Zero, &x0, config.horizon, None) {
            Ok(t) => t.final_state().iter().map(|v| v * v).sum::<f64>().sqrt(),
            Err(_) => f64::INFINITY,
        }
    };
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(trials.max(1));
    let mut ratios = vec![0.0; trials];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|wid| {
                let run = &run;
                scope.spawn(move || (wid..trials).step_by(workers).map(|i| (i, run(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("trial threads do not panic") {
                ratios[i] = r;
            }
        }
    });
    let stable = ratios.iter().filter(|&&r| r <= config.threshold).count();
    Ok(MonteCarloReport {
        trials,
        stable,
        fraction_stable: if trials == 0 {
            1.0
        } else {
            stable as f64 / trials as f64
        },
        final_ratios: ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_constant_matches_diagonal_case() {
        let l = sinusoid_lipschitz(&[0.1, 0.2, 0.3, 0.0, 0.1], &[2, 3, 0, 0, 1]);
        assert!((l - 0.3).abs() < 1e-12);
    }

    #[test]
    fn perturbation_has_requested_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_sinusoid_perturbation(&mut rng, 5, 0.7);
        if let crate::system::NonlinearityKind::CoordinateSinusoid { coefficients, sources } = &d.kind {
            assert!((sinusoid_lipschitz(coefficients, sources) - 0.7).abs() < 1e-12);
        } else {
            panic!("expected a sinusoid");
        }
    }
}
