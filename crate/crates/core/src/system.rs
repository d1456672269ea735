//! The uncertain plant
//!
//! ```text
//! x(k+1) = (A + M1 F(k) N) x(k) + Phi(x, u) + B1 u(k) + B2 w(k)
//! y(k)   = (C + M2 F(k) N) x(k) + D w(k)
//! z(k)   = H x(k)
//! ```
//!
//! together with the nonlinearity descriptor, the admissible uncertainty
//! `F(k)` (with `F'F <= I`) and finite-energy disturbances.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{spectral_norm, LinalgError, Matrix};

/// Relative singular-value threshold for the rank assumptions on `B1` and `C`.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch in {field}: {msg}")]
    Dimension { field: String, msg: String },
    #[error("rank assumption violated: rank({matrix}) = {rank}, required {required} < {n}")]
    Rank {
        matrix: String,
        rank: usize,
        required: usize,
        n: usize,
    },
    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),
    #[error("invalid signal: {0}")]
    Signal(String),
}

impl SystemError {
    /// Stable short code for each error family.
    pub fn code(&self) -> &'static str {
        match self {
            SystemError::Io { .. } => "io",
            SystemError::Parse(_) => "parse",
            SystemError::Dimension { .. } => "dimension",
            SystemError::Rank { .. } => "rank",
            SystemError::Nonlinearity(_) => "nonlinearity",
            SystemError::Signal(_) => "signal",
        }
    }
}

/// State, input, output, uncertainty-channel and disturbance dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub d: usize,
}

/// Plant matrices of the uncertain system plus its nonlinearity.
#[derive(Debug, Clone)]
pub struct UncertainSystem {
    pub dims: Dimensions,
    pub a: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub h: Matrix,
    pub m1: Matrix,
    pub m2: Matrix,
    pub n: Matrix,
    pub phi: NonlinearityDescriptor,
    /// Lipschitz constant of the actual nonlinearity, when the file declares one.
    pub gamma: Option<f64>,
}

impl UncertainSystem {
    /// Builds a system and checks dimensions and the rank assumptions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Matrix,
        b1: Matrix,
        b2: Matrix,
        c: Matrix,
        d: Matrix,
        h: Matrix,
        m1: Matrix,
        m2: Matrix,
        n: Matrix,
        phi: NonlinearityDescriptor,
    ) -> Result<Self, SystemError> {
        let dims = Dimensions {
            n: a.rows(),
            m: b1.cols(),
            p: c.rows(),
            q: m1.cols(),
            d: b2.cols(),
        };
        let sys = UncertainSystem {
            dims,
            a,
            b1,
            b2,
            c,
            d,
            h,
            m1,
            m2,
            n,
            phi,
            gamma: None,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Rows of `H`, which may differ from `n`.
    pub fn nz(&self) -> usize {
        self.h.rows()
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let Dimensions { n, m, p, q, d } = self.dims;
        let expect = |field: &str, mat: &Matrix, rows: Option<usize>, cols: usize| {
            let rows_ok = rows.is_none_or(|r| r == mat.rows());
            if rows_ok && mat.cols() == cols {
                Ok(())
            } else {
                let want = rows.map_or_else(|| "any".to_string(), |r| r.to_string());
                Err(SystemError::Dimension {
                    field: field.to_string(),
                    msg: format!("expected {want}x{cols}, got {}x{}", mat.rows(), mat.cols()),
                })
            }
        };
        expect("A", &self.a, Some(n), n)?;
        expect("B1", &self.b1, Some(n), m)?;
        expect("B2", &self.b2, Some(n), d)?;
        expect("C", &self.c, Some(p), n)?;
        expect("D", &self.d, Some(p), d)?;
        expect("H", &self.h, None, n)?;
        expect("M1", &self.m1, Some(n), q)?;
        expect("M2", &self.m2, Some(p), q)?;
        expect("N", &self.n, Some(q), n)?;
        if let Some(dim) = self.phi.state_dim() {
            if dim != n {
                return Err(SystemError::Dimension {
                    field: "phi".into(),
                    msg: format!("nonlinearity acts on {dim} states, system has {n}"),
                });
            }
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(SystemError::Parse(format!(
                    "gamma must be a finite nonnegative number, got {g}"
                )));
            }
        }
        let b1_rank = self.b1.rank(RANK_TOL);
        if b1_rank != m || m >= n {
            return Err(SystemError::Rank {
                matrix: "B1".into(),
                rank: b1_rank,
                required: m,
                n,
            });
        }
        let c_rank = self.c.rank(RANK_TOL);
        if c_rank != p || p >= n {
            return Err(SystemError::Rank {
                matrix: "C".into(),
                rank: c_rank,
                required: p,
                n,
            });
        }
        Ok(())
    }

    /// Replaces `H`, keeping everything else.
    pub fn with_h(mut self, h: Matrix) -> Result<Self, SystemError> {
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn from_json_str(text: &str) -> Result<Self, SystemError> {
        let file: SystemFile = serde_json::from_str(text).map_err(|e| SystemError::Parse(e.to_string()))?;
        file.into_system()
    }

    pub fn to_json_string(&self) -> Result<String, SystemError> {
        let file = SystemFile::from_system(self)?;
        serde_json::to_string_pretty(&file).map_err(|e| SystemError::Parse(e.to_string()))
    }
}

/// Reads and validates a system file.
pub fn load_system(path: impl AsRef<Path>) -> Result<UncertainSystem, SystemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SystemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    UncertainSystem::from_json_str(&text)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct SystemFile {
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    d: usize,
    A: Vec<Vec<f64>>,
    B1: Vec<Vec<f64>>,
    B2: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    H: Vec<Vec<f64>>,
    M1: Vec<Vec<f64>>,
    M2: Vec<Vec<f64>>,
    N: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<PhiFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhiFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    sources: Vec<usize>,
    #[serde(default)]
    lipschitz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region_radius: Option<f64>,
}

fn field_matrix(field: &str, rows: &[Vec<f64>], shape: (Option<usize>, usize)) -> Result<Matrix, SystemError> {
    let dim_err = |msg: String| SystemError::Dimension {
        field: field.to_string(),
        msg,
    };
    let (want_rows, want_cols) = shape;
    if let Some(r) = want_rows {
        if rows.len() != r {
            return Err(dim_err(format!("expected {r} rows, got {}", rows.len())));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != want_cols {
            return Err(dim_err(format!(
                "row {i}: expected {want_cols} columns, got {}",
                row.len()
            )));
        }
    }
    Matrix::from_rows(rows).map_err(|e| match e {
        LinalgError::NonFinite { .. } => SystemError::Parse(format!("{field}: non-finite entry")),
        other => dim_err(other.to_string()),
    })
}

impl SystemFile {
    fn into_system(self) -> Result<UncertainSystem, SystemError> {
        let (n, m, p, q, d) = (self.n, self.m, self.p, self.q, self.d);
        for (name, v) in [("n", n), ("m", m), ("p", p), ("q", q), ("d", d)] {
            if v == 0 {
                return Err(SystemError::Dimension {
                    field: name.into(),
                    msg: "must be positive".into(),
                });
            }
        }
        let phi = match self.phi {
            None => NonlinearityDescriptor::none(),
            Some(f) => f.into_descriptor()?,
        };
        let sys = UncertainSystem {
            dims: Dimensions { n, m, p, q, d },
            a: field_matrix("A", &self.A, (Some(n), n))?,
            b1: field_matrix("B1", &self.B1, (Some(n), m))?,
            b2: field_matrix("B2", &self.B2, (Some(n), d))?,
            c: field_matrix("C", &self.C, (Some(p), n))?,
            d: field_matrix("D", &self.D, (Some(p), d))?,
            h: field_matrix("H", &self.H, (None, n))?,
            m1: field_matrix("M1", &self.M1, (Some(n), q))?,
            m2: field_matrix("M2", &self.M2, (Some(p), q))?,
            n: field_matrix("N", &self.N, (Some(q), n))?,
            phi,
            gamma: self.gamma,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn from_system(sys: &UncertainSystem) -> Result<Self, SystemError> {
        let Dimensions { n, m, p, q, d } = sys.dims;
        let phi = match &sys.phi.kind {
            NonlinearityKind::None => None,
            NonlinearityKind::CoordinateSinusoid { coefficients, sources } => Some(PhiFile {
                kind: "coordinate_sinusoid".into(),
                coefficients: coefficients.clone(),
                sources: sources.iter().map(|s| s + 1).collect(),
                lipschitz: sys.phi.declared_lipschitz,
                region_radius: sys.phi.region_radius,
            }),
            NonlinearityKind::Custom(_) => {
                return Err(SystemError::Nonlinearity(
                    "custom callbacks cannot be serialized".into(),
                ))
            }
        };
        Ok(SystemFile {
            n,
            m,
            p,
            q,
            d,
            A: sys.a.to_rows(),
            B1: sys.b1.to_rows(),
            B2: sys.b2.to_rows(),
            C: sys.c.to_rows(),
            D: sys.d.to_rows(),
            H: sys.h.to_rows(),
            M1: sys.m1.to_rows(),
            M2: sys.m2.to_rows(),
            N: sys.n.to_rows(),
            phi,
            gamma: sys.gamma,
        })
    }
}

impl PhiFile {
    fn into_descriptor(self) -> Result<NonlinearityDescriptor, SystemError> {
        let mut desc = match self.kind.as_str() {
            "none" => NonlinearityDescriptor::none(),
            "coordinate_sinusoid" => {
                if self.sources.contains(&0) {
                    return Err(SystemError::Nonlinearity("phi.sources are 1-based".into()));
                }
                let sources = self.sources.iter().map(|s| s - 1).collect();
                NonlinearityDescriptor::coordinate_sinusoid(self.coefficients, sources, self.lipschitz)?
            }
            "custom_callback" => {
                return Err(SystemError::Nonlinearity(
                    "custom_callback nonlinearities exist only in-process and cannot be loaded from a file".into(),
                ))
            }
            other => return Err(SystemError::Nonlinearity(format!("unknown phi.kind '{other}'"))),
        };
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) {
            return Err(SystemError::Nonlinearity(
                "phi.lipschitz must be finite and nonnegative".into(),
            ));
        }
        desc.declared_lipschitz = self.lipschitz;
        desc.region_radius = self.region_radius;
        Ok(desc)
    }
}

/// In-process nonlinearity `(x, u) -> Phi(x, u)`.
pub type PhiFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum NonlinearityKind {
    None,
    /// `Phi_i(x) = coefficients[i] * sin(x[sources[i]])`, 0-based sources.
    CoordinateSinusoid {
        coefficients: Vec<f64>,
        sources: Vec<usize>,
    },
    Custom(CustomPhi),
}

#[derive(Clone)]
pub struct CustomPhi {
    pub state_dim: usize,
    pub input_dim: usize,
    pub f: PhiFn,
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityKind::None => write!(f, "None"),
            NonlinearityKind::CoordinateSinusoid { coefficients, sources } => f
                .debug_struct("CoordinateSinusoid")
                .field("coefficients", coefficients)
                .field("sources", sources)
                .finish(),
            NonlinearityKind::Custom(c) => write!(f, "Custom({}x{})", c.state_dim, c.input_dim),
        }
    }
}

/// A nonlinearity together with its declared Lipschitz constant.
#[derive(Debug, Clone)]
pub struct NonlinearityDescriptor {
    pub kind: NonlinearityKind,
    pub declared_lipschitz: f64,
    /// Radius of the region in which the Lipschitz bound is claimed; `None` means global.
    pub region_radius: Option<f64>,
}

impl NonlinearityDescriptor {
    pub fn none() -> Self {
        NonlinearityDescriptor {
            kind: NonlinearityKind::None,
            declared_lipschitz: 0.0,
            region_radius: None,
        }
    }

    pub fn coordinate_sinusoid(
        coefficients: Vec<f64>,
        sources: Vec<usize>,
        lipschitz: f64,
    ) -> Result<Self, SystemError> {
        let n = coefficients.len();
        if sources.len() != n {
            return Err(SystemError::Nonlinearity(format!(
                "{} coefficients but {} sources",
                n,
                sources.len()
            )));
        }
        if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
            return Err(SystemError::Nonlinearity(format!(
                "source index {} outside 1..{n}",
                bad + 1
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(SystemError::Nonlinearity("non-finite coefficient".into()));
        }
        Ok(NonlinearityDescriptor {
            kind: NonlinearityKind::CoordinateSinusoid { coefficients, sources },
            declared_lipschitz: lipschitz,
            region_radius: None,
        })
    }

    /// Wraps a callback. The caller is responsible for `Phi(0, u) = 0`.
    pub fn custom(state_dim: usize, input_dim: usize, lipschitz: f64, f: PhiFn) -> Self {
        NonlinearityDescriptor {
            kind: NonlinearityKind::Custom(CustomPhi {
                state_dim,
                input_dim,
                f,
            }),
            declared_lipschitz: lipschitz,
            region_radius: None,
        }
    }

    /// Number of states the nonlinearity acts on, if it is fixed.
    pub fn state_dim(&self) -> Option<usize> {
        match &self.kind {
            NonlinearityKind::None => None,
            NonlinearityKind::CoordinateSinusoid { coefficients, .. } => Some(coefficients.len()),
            NonlinearityKind::Custom(c) => Some(c.state_dim),
        }
    }

    fn input_dim(&self) -> usize {
        match &self.kind {
            NonlinearityKind::Custom(c) => c.input_dim,
            _ => 0,
        }
    }

    /// Sum of two nonlinearities; the declared constant is the sum of both.
    pub fn plus(&self, other: &NonlinearityDescriptor) -> NonlinearityDescriptor {
        if matches!(other.kind, NonlinearityKind::None) {
            return self.clone();
        }
        if matches!(self.kind, NonlinearityKind::None) {
            return other.clone();
        }
        let (a, b) = (self.clone(), other.clone());
        let n = self.state_dim().or(other.state_dim()).unwrap_or(0);
        let m = self.input_dim().max(other.input_dim());
        let f: PhiFn = Arc::new(move |x, u| {
            let mut out = evaluate_nonlinearity(&a, x, u);
            for (o, v) in out.iter_mut().zip(evaluate_nonlinearity(&b, x, u)) {
                *o += v;
            }
            out
        });
        let mut sum = NonlinearityDescriptor::custom(n, m, self.declared_lipschitz + other.declared_lipschitz, f);
        sum.region_radius = match (self.region_radius, other.region_radius) {
            (Some(r), Some(s)) => Some(r.min(s)),
            (r, s) => r.or(s),
        };
        sum
    }
}

/// `Phi(x, u)`; the `none` kind returns zeros of the length of `x`.
pub fn evaluate_nonlinearity(desc: &NonlinearityDescriptor, x: &[f64], u: &[f64]) -> Vec<f64> {
    match &desc.kind {
        NonlinearityKind::None => vec![0.0; x.len()],
        NonlinearityKind::CoordinateSinusoid { coefficients, sources } => {
            coefficients.iter().zip(sources).map(|(a, &s)| a * x[s].sin()).collect()
        }
        NonlinearityKind::Custom(c) => (c.f)(x, u),
    }
}

fn ball_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|v| v * r / norm).collect()
}

/// Sampled lower estimate of the Lipschitz constant of `Phi` in `x` over the
/// ball of radius `region_radius`.
///
/// Pairs alternate between two independent points of the ball and a point
/// with a nearby neighbour, so local slopes are probed as well as chords. The
/// draw sequence depends only on `seed`, so more samples extend the same
/// sequence and the estimate is nondecreasing in `samples`.
pub fn estimate_lipschitz(desc: &NonlinearityDescriptor, region_radius: f64, samples: usize, seed: u64) -> f64 {
    let Some(n) = desc.state_dim() else {
        return 0.0;
    };
    let m = desc.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for i in 0..samples {
        let x1 = ball_point(&mut rng, n, region_radius);
        let x2 = if i % 2 == 0 {
            ball_point(&mut rng, n, region_radius)
        } else {
            let dx = ball_point(&mut rng, n, 1e-3 * region_radius);
            x1.iter().zip(dx).map(|(a, b)| a + b).collect()
        };
        let u = ball_point(&mut rng, m, region_radius);
        let dx = x1.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dx == 0.0 {
            continue;
        }
        let f1 = evaluate_nonlinearity(desc, &x1, &u);
        let f2 = evaluate_nonlinearity(desc, &x2, &u);
        let df = f1.iter().zip(&f2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        best = best.max(df / dx);
    }
    best
}

/// Admissible uncertainty `F(k)` with `F'F <= I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintySignal {
    Zero,
    /// A fixed matrix with spectral norm at most one.
    Constant {
        f: Matrix,
    },
    /// A fresh random orthogonal matrix at every step, so every singular
    /// value sits at the admissible limit of one.
    RandomSwitching {
        seed: u64,
    },
    /// `sin(omega k + phase) I`.
    Sinusoidal {
        omega: f64,
        phase: f64,
    },
}

impl UncertaintySignal {
    pub fn validate(&self, q: usize) -> Result<(), SystemError> {
        if let UncertaintySignal::Constant { f } = self {
            if f.shape() != (q, q) {
                return Err(SystemError::Signal(format!("constant F must be {q}x{q}")));
            }
            if spectral_norm(f) > 1.0 + 1e-12 {
                return Err(SystemError::Signal("constant F has spectral norm above 1".into()));
            }
        }
        Ok(())
    }

    /// `F(k)` as a `q x q` matrix; a deterministic function of `(seed, k)`.
    pub fn at(&self, q: usize, k: usize) -> DMatrix<f64> {
        match self {
            UncertaintySignal::Zero => DMatrix::zeros(q, q),
            UncertaintySignal::Constant { f } => f.as_dmatrix().clone(),
            UncertaintySignal::Sinusoidal { omega, phase } => {
                DMatrix::identity(q, q) * (omega * k as f64 + phase).sin()
            }
            UncertaintySignal::RandomSwitching { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k as u64);
                random_orthogonal(&mut rng, q)
            }
        }
    }
}

fn random_orthogonal(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(q, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut qm, r) = qr.unpack();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            qm.column_mut(j).neg_mut();
        }
    }
    qm
}

/// Exogenous disturbance `w(k)`; all kinds have finite energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSignal {
    Zero,
    /// `amplitude` on every channel at step `at`, zero elsewhere.
    Impulse {
        amplitude: f64,
        at: usize,
    },
    /// Independent Gaussian samples scaled by `amplitude` for `k < horizon`.
    FiniteRandom {
        seed: u64,
        horizon: usize,
        amplitude: f64,
    },
    /// Recorded samples, one row per step; zero after the last row.
    FromFile {
        samples: Vec<Vec<f64>>,
    },
}

impl DisturbanceSignal {
    /// Reads whitespace- or comma-separated rows of numbers.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SystemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SystemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| SystemError::Parse(format!("{}: line {}: bad number", path.display(), i + 1)))?;
            samples.push(row);
        }
        Ok(DisturbanceSignal::FromFile { samples })
    }

    pub fn at(&self, d: usize, k: usize) -> Vec<f64> {
        match self {
            DisturbanceSignal::Zero => vec![0.0; d],
            DisturbanceSignal::Impulse { amplitude, at } => vec![if k == *at { *amplitude } else { 0.0 }; d],
            DisturbanceSignal::FiniteRandom {
                seed,
                horizon,
                amplitude,
            } => {
                if k >= *horizon {
                    return vec![0.0; d];
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k as u64);
                (0..d)
                    .map(|_| amplitude * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            DisturbanceSignal::FromFile { samples } => samples.get(k).map_or_else(|| vec![0.0; d], |r| r.clone()),
        }
    }

    pub fn validate(&self, d: usize) -> Result<(), SystemError> {
        if let DisturbanceSignal::FromFile { samples } = self {
            if let Some((i, _)) = samples.iter().enumerate().find(|(_, r)| r.len() != d) {
                return Err(SystemError::Signal(format!(
                    "disturbance row {i} does not have {d} entries"
                )));
            }
        }
        Ok(())
    }

    /// Same signal with every sample multiplied by `s`.
    pub fn scaled(&self, s: f64) -> DisturbanceSignal {
        match self {
            DisturbanceSignal::Zero => DisturbanceSignal::Zero,
            DisturbanceSignal::Impulse { amplitude, at } => DisturbanceSignal::Impulse {
                amplitude: amplitude * s,
                at: *at,
            },
            DisturbanceSignal::FiniteRandom {
                seed,
                horizon,
                amplitude,
            } => DisturbanceSignal::FiniteRandom {
                seed: *seed,
                horizon: *horizon,
                amplitude: amplitude * s,
            },
            DisturbanceSignal::FromFile { samples } => DisturbanceSignal::FromFile {
                samples: samples.iter().map(|r| r.iter().map(|v| v * s).collect()).collect(),
            },
        }
    }

    /// `sum_k |w(k)|^2` over the first `horizon` steps.
    pub fn energy(&self, d: usize, horizon: usize) -> f64 {
        (0..horizon)
            .map(|k| self.at(d, k).iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// The five-state benchmark plant with three inputs, two outputs, two
/// uncertainty channels and a scalar disturbance, with `H = 0.15 I`.
pub fn paper_example() -> UncertainSystem {
    let m = |rows: &[&[f64]]| Matrix::from_rows(rows).expect("benchmark data is well formed");
    let a = m(&[
        &[0.5000, -0.5975, 0.3735, 0.0457, 0.3575],
        &[0.2500, 0.3000, 0.4017, 0.1114, 0.0227],
        &[0.4880, 0.1384, 0.2500, 0.7500, 0.7500],
        &[0.3838, 0.0974, 0.5000, 0.2500, 0.5000],
        &[0.0347, 0.1865, -0.2500, 0.5000, 0.2500],
    ]);
    let b1 = m(&[
        &[0.7, 0.8, 0.0],
        &[0.4, 0.9, 0.9],
        &[0.9, 0.9, 0.2],
        &[0.9, 0.6, 0.7],
        &[0.0, 0.5, 0.3],
    ]);
    let b2 = Matrix::filled(5, 1, 1.0);
    // the measurement matrix is published as its 5x2 transpose
    let c = m(&[&[0.5, 0.2, 0.0, 0.0, 0.3], &[0.0, 0.2, 0.1, 0.3, 0.0]]);
    let d = m(&[&[0.2], &[0.2]]);
    let h = Matrix::identity(5).scale(0.15);
    let m1 = m(&[&[0.1, 0.0], &[0.1, 0.1], &[0.1, 0.1], &[0.0, 0.1], &[0.0, 0.2]]);
    let m2 = m(&[&[0.0, 0.1], &[0.1, 0.2]]);
    let n = m(&[&[0.3, 0.15, 0.1, 0.0, 0.2], &[0.1, 0.2, 0.1, 0.2, 0.0]]);
    let phi = paper_nonlinearity();
    let mut sys = UncertainSystem::new(a, b1, b2, c, d, h, m1, m2, n, phi).expect("benchmark plant is valid");
    sys.gamma = Some(0.3);
    sys
}

/// `(0.1 sin x3, 0.2 sin x4, 0.3 sin x1, 0, 0.1 sin x2)`, Lipschitz constant 0.3.
pub fn paper_nonlinearity() -> NonlinearityDescriptor {
    NonlinearityDescriptor::coordinate_sinusoid(vec![0.1, 0.2, 0.3, 0.0, 0.1], vec![2, 3, 0, 0, 1], 0.3)
        .expect("benchmark nonlinearity is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_example_dimensions() {
        let s = paper_example();
        assert_eq!(
            s.dims,
            Dimensions {
                n: 5,
                m: 3,
                p: 2,
                q: 2,
                d: 1
            }
        );
        assert_eq!(s.nz(), 5);
    }

    #[test]
    fn json_round_trip() {
        let s = paper_example();
        let text = s.to_json_string().unwrap();
        let back = UncertainSystem::from_json_str(&text).unwrap();
        assert_eq!(back.a, s.a);
        assert_eq!(back.c, s.c);
        assert_eq!(back.gamma, Some(0.3));
        let x = [0.3, -0.2, 0.9, 0.1, 0.5];
        assert_eq!(
            evaluate_nonlinearity(&back.phi, &x, &[]),
            evaluate_nonlinearity(&s.phi, &x, &[])
        );
    }

    #[test]
    fn orthogonal_draws_are_deterministic() {
        let f = UncertaintySignal::RandomSwitching { seed: 3 };
        assert_eq!(f.at(3, 17), f.at(3, 17));
        assert_ne!(f.at(3, 17), f.at(3, 18));
    }

    #[test]
    fn impulse_energy() {
        let w = DisturbanceSignal::Impulse { amplitude: 2.0, at: 1 };
        assert_eq!(w.energy(3, 10), 12.0);
    }
}
