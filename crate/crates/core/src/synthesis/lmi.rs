//! Decision-variable layout and the block matrices of every program.
//!
//! Each constraint is written once as a function of decoded variable values
//! ([`Vars`]). Lowering to [`LmiBlock`] probes that function at the origin
//! and at each coordinate vector, which is exact because every block is
//! affine in the decision vector. The same functions are reused to verify a
//! returned certificate independently of the lowered problem.

use std::ops::Range;

use nalgebra::DMatrix;

use super::{GammaMode, Method, MuMode, SynthesisRequest};
use crate::linalg::SymmetricMatrix;
use crate::sdp::{smat, svec_len, LmiBlock, SdpProblem, VariableBounds};

/// Plant data the programs are built from, as plain dense matrices.
#[derive(Debug, Clone)]
pub(crate) struct Plant {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

impl Plant {
    fn nx(&self) -> usize {
        self.a.nrows()
    }
    fn q(&self) -> usize {
        self.m1.ncols()
    }
    fn nw(&self) -> usize {
        self.b2.ncols()
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    pub p: Range<usize>,
    pub g: Option<(Range<usize>, usize, usize)>,
    pub q: Option<(Range<usize>, usize)>,
    pub alpha: Option<usize>,
    pub eps1: usize,
    pub eps2: usize,
    pub zeta: Option<usize>,
    pub acal: Option<Range<usize>>,
    pub omega: Option<usize>,
    pub num_vars: usize,
    nx: usize,
}

/// Decoded values of all decision variables; absent ones hold their fixed value.
#[derive(Debug, Clone)]
pub(crate) struct Vars {
    pub p: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub alpha: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub zeta: f64,
    pub acal: DMatrix<f64>,
    pub omega: f64,
}

impl Layout {
    pub fn new(method: Method, plant: &Plant, req: &SynthesisRequest) -> Layout {
        let nx = plant.nx();
        let (m, p) = (plant.b1.ncols(), plant.c.nrows());
        let mut next = 0;
        let mut take = |k: usize| {
            let r = next..next + k;
            next += k;
            r
        };
        let mut l = Layout {
            nx,
            p: take(svec_len(nx)),
            ..Default::default()
        };
        match method {
            Method::Lemma3Analysis => {}
            Method::Theorem1 => l.g = Some((take(nx * p), nx, p)),
            Method::Corollary1 | Method::Corollary2 => {
                l.g = Some((take(m * p), m, p));
                l.q = Some((take(m * m), m));
            }
        }
        if method != Method::Corollary2 && req.gamma_mode == GammaMode::Maximize {
            l.alpha = Some(take(1).start);
        }
        l.eps1 = take(1).start;
        l.eps2 = take(1).start;
        if req.mu_mode == MuMode::Optimize {
            l.zeta = Some(take(1).start);
        }
        if method == Method::Corollary2 {
            l.acal = Some(take(nx * nx));
            l.omega = Some(take(1).start);
        }
        l.num_vars = next;
        l
    }

    pub fn decode(&self, v: &[f64], req: &SynthesisRequest) -> Vars {
        let full = |r: &Range<usize>, rows: usize, cols: usize| DMatrix::from_row_slice(rows, cols, &v[r.clone()]);
        let (g, q) = match (&self.g, &self.q) {
            (Some((gr, rows, cols)), q) => (
                full(gr, *rows, *cols),
                q.as_ref()
                    .map_or_else(|| DMatrix::zeros(0, 0), |(qr, k)| full(qr, *k, *k)),
            ),
            _ => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
        };
        let fixed_zeta = match req.mu_mode {
            MuMode::Fixed(mu) => mu * mu,
            MuMode::Optimize => 0.0,
        };
        Vars {
            p: smat(self.nx, &v[self.p.clone()]).to_dmatrix(),
            g,
            q,
            alpha: self.alpha.map_or(0.0, |i| v[i]),
            eps1: v[self.eps1],
            eps2: v[self.eps2],
            zeta: self.zeta.map_or(fixed_zeta, |i| v[i]),
            acal: self
                .acal
                .as_ref()
                .map_or_else(|| DMatrix::zeros(0, 0), |r| full(r, self.nx, self.nx)),
            omega: self.omega.map_or(0.0, |i| v[i]),
        }
    }
}

/// Fills a symmetric block matrix from its upper-triangular blocks.
fn assemble(sizes: &[usize], upper: &[(usize, usize, DMatrix<f64>)]) -> DMatrix<f64> {
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let total: usize = sizes.iter().sum();
    let mut out = DMatrix::zeros(total, total);
    for (i, j, b) in upper {
        assert_eq!((b.nrows(), b.ncols()), (sizes[*i], sizes[*j]), "block ({i},{j})");
        out.view_mut((offsets[*i], offsets[*j]), b.shape()).copy_from(b);
        if i != j {
            out.view_mut((offsets[*j], offsets[*i]), (b.ncols(), b.nrows()))
                .copy_from(&b.transpose());
        }
    }
    out
}

type BlockFn = Box<dyn Fn(&Vars) -> DMatrix<f64> + Send + Sync>;

/// One matrix inequality `f(vars) <= -tau I`.
pub(crate) struct Constraint {
    pub label: String,
    pub f: BlockFn,
}

impl Constraint {
    fn new(label: &str, f: impl Fn(&Vars) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Constraint {
            label: label.to_string(),
            f: Box::new(f),
        }
    }
}

/// The full program: constraints, equalities on `PB1 = B1 Q`, objective.
pub(crate) struct Program {
    pub layout: Layout,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub bounds: Vec<VariableBounds>,
    with_equality: bool,
    b1: DMatrix<f64>,
}

impl Program {
    pub fn build(method: Method, plant: &Plant, req: &SynthesisRequest) -> Program {
        let layout = Layout::new(method, plant, req);
        let nx = plant.nx();
        let mut cs = Vec::new();

        cs.push(Constraint::new("P > 0", |v| -v.p.clone()));
        if req.bound_p {
            cs.push(Constraint::new("P < I", move |v| &v.p - DMatrix::identity(nx, nx)));
        }
        if layout.alpha.is_some() {
            cs.push(Constraint::new("alpha > 0", |v| DMatrix::from_element(1, 1, -v.alpha)));
        }
        cs.push(Constraint::new("eps1 > 0", |v| DMatrix::from_element(1, 1, -v.eps1)));
        cs.push(Constraint::new("eps2 > 0", |v| DMatrix::from_element(1, 1, -v.eps2)));
        if layout.zeta.is_some() {
            cs.push(Constraint::new("zeta > 0", |v| DMatrix::from_element(1, 1, -v.zeta)));
        }
        cs.push(main_lmi(method, plant, req.gamma_mode));
        cs.push(mu_lmi(method, plant));
        if matches!(method, Method::Corollary1 | Method::Corollary2) {
            let m = plant.b1.ncols();
            cs.push(Constraint::new("Pi1", move |v| {
                let i = DMatrix::<f64>::identity(m, m);
                let iq = &i - &v.q;
                -assemble(&[m, m], &[(0, 0, i.clone()), (0, 1, iq), (1, 1, i.clone())])
            }));
        }
        if method == Method::Corollary2 {
            let weights = req
                .weights
                .clone()
                .expect("validated request carries weights")
                .into_dmatrix();
            for i in 0..nx {
                for j in 0..nx {
                    let c = weights[(i, j)];
                    let label = format!("omega < c{}{} a{}{}", i + 1, j + 1, i + 1, j + 1);
                    cs.push(Constraint::new(&label, move |v| {
                        DMatrix::from_element(1, 1, v.omega - c * v.acal[(i, j)])
                    }));
                }
            }
            cs.push(Constraint::new("omega > 0", |v| DMatrix::from_element(1, 1, -v.omega)));
        }

        let mut objective = vec![0.0; layout.num_vars];
        match method {
            Method::Corollary2 => {
                objective[layout.eps1] = req.w1;
                if let Some(o) = layout.omega {
                    objective[o] = -req.w1;
                }
            }
            _ => {
                if let Some(a) = layout.alpha {
                    objective[a] = req.w1;
                    objective[layout.eps1] = req.w1;
                }
            }
        }
        if let Some(z) = layout.zeta {
            objective[z] = req.w2;
        }
        let mut bounds = vec![VariableBounds::default(); layout.num_vars];
        if let Some(r) = &layout.acal {
            for b in &mut bounds[r.clone()] {
                b.lower = Some(0.0);
            }
        }
        Program {
            layout,
            constraints: cs,
            objective,
            bounds,
            with_equality: matches!(method, Method::Corollary1 | Method::Corollary2),
            b1: plant.b1.clone(),
        }
    }

    /// Lowers to canonical form by probing each constraint.
    pub fn lower(&self, req: &SynthesisRequest) -> SdpProblem {
        let nv = self.layout.num_vars;
        let mut problem = SdpProblem::new(nv);
        problem.objective = self.objective.clone();
        problem.bounds = self.bounds.clone();
        let origin = self.layout.decode(&vec![0.0; nv], req);
        let probes: Vec<Vars> = (0..nv)
            .map(|i| {
                let mut e = vec![0.0; nv];
                e[i] = 1.0;
                self.layout.decode(&e, req)
            })
            .collect();
        for c in &self.constraints {
            let f0 = (c.f)(&origin);
            let mut block = LmiBlock::new(c.label.clone(), SymmetricMatrix::from_dmatrix_sym(&f0));
            for (i, probe) in probes.iter().enumerate() {
                let fi = (c.f)(probe) - &f0;
                if fi.amax() > 0.0 {
                    block.terms.push((i, SymmetricMatrix::from_dmatrix_sym(&fi)));
                }
            }
            problem.add_block(block);
        }
        if self.with_equality {
            // (P B1 - B1 Q)_{rc} = 0, linear in v: read coefficients off the probes
            let eq = |v: &Vars| &v.p * &self.b1 - &self.b1 * &v.q;
            let e0 = eq(&origin);
            let (rows, cols) = e0.shape();
            for r in 0..rows {
                for c in 0..cols {
                    let row: Vec<f64> = probes.iter().map(|pv| eq(pv)[(r, c)] - e0[(r, c)]).collect();
                    problem.add_equality(row, -e0[(r, c)]);
                }
            }
        }
        problem
    }

    /// Largest eigenvalue of every constraint evaluated directly at `vars`.
    pub fn evaluate(&self, vars: &Vars) -> Vec<(String, f64)> {
        self.constraints
            .iter()
            .map(|c| {
                let m = (c.f)(vars);
                let sym = (&m + m.transpose()) * 0.5;
                (c.label.clone(), crate::linalg::sym_max_eigenvalue(&sym))
            })
            .collect()
    }

    pub fn equality_residual(&self, vars: &Vars) -> Option<f64> {
        self.with_equality
            .then(|| (&vars.p * &self.b1 - &self.b1 * &vars.q).amax())
    }
}

/// Closed-loop matrices `(A_cl, M1_cl)` as they enter the main LMI, through
/// the `G` variable of the chosen method.
fn couplings(method: Method, plant: &Plant, v: &Vars) -> (DMatrix<f64>, DMatrix<f64>) {
    let pa = &v.p * &plant.a;
    let pm1 = &v.p * &plant.m1;
    match method {
        Method::Lemma3Analysis => (pa, pm1),
        Method::Theorem1 => (pa + &v.g * &plant.c, pm1 + &v.g * &plant.m2),
        Method::Corollary1 | Method::Corollary2 => {
            let b1g = &plant.b1 * &v.g;
            (pa + &b1g * &plant.c, pm1 + &b1g * &plant.m2)
        }
    }
}

fn main_lmi(method: Method, plant: &Plant, gamma: GammaMode) -> Constraint {
    let plant = plant.clone();
    let label = match method {
        Method::Lemma3Analysis => "analysis LMI",
        _ => "synthesis LMI",
    };
    Constraint::new(label, move |v| {
        let nx = plant.nx();
        let q = plant.q();
        let i = DMatrix::<f64>::identity(nx, nx);
        let (pa_cl, pm_cl) = couplings(method, &plant, v);
        let mut lam = plant.h.transpose() * &plant.h - &v.p + plant.n.transpose() * &plant.n * v.eps2;
        let tail = [
            (2, 2, &v.p * -0.5),
            (2, 3, v.p.clone()),
            (2, 4, pm_cl),
            (3, 3, &v.p - &i * (2.0 * v.eps1)),
            (4, 4, DMatrix::identity(q, q) * -v.eps2),
        ];
        match gamma {
            GammaMode::Fixed(g) if method != Method::Corollary2 => {
                lam += &i * (g * g * (1.0 + v.eps1));
                // the Lipschitz row is absorbed into the (1,1) block; indices shift by one
                let mut blocks = vec![(0, 1, pa_cl.transpose()), (0, 0, lam)];
                blocks.extend(tail.into_iter().map(|(r, c, b)| (r - 1, c - 1, b)));
                assemble(&[nx, nx, nx, q], &blocks)
            }
            _ => {
                let (coupling, lip) = if method == Method::Corollary2 {
                    (v.acal.clone(), -DMatrix::identity(nx, nx))
                } else {
                    (i.clone(), &i * -v.alpha)
                };
                let mut blocks = vec![(0, 0, lam), (0, 1, coupling), (0, 2, pa_cl.transpose()), (1, 1, lip)];
                blocks.extend(tail);
                assemble(&[nx, nx, nx, nx, q], &blocks)
            }
        }
    })
}

fn mu_lmi(method: Method, plant: &Plant) -> Constraint {
    let plant = plant.clone();
    Constraint::new("attenuation LMI", move |v| {
        let (nx, nw) = (plant.nx(), plant.nw());
        let pb = match method {
            Method::Lemma3Analysis => &v.p * &plant.b2,
            Method::Theorem1 => &v.p * &plant.b2 + &v.g * &plant.d,
            Method::Corollary1 | Method::Corollary2 => &v.p * &plant.b2 + &plant.b1 * &v.g * &plant.d,
        };
        assemble(
            &[nw, nx, nx],
            &[
                (0, 0, DMatrix::identity(nw, nw) * -v.zeta),
                (0, 1, pb.transpose()),
                (0, 2, pb.transpose()),
                (1, 1, &v.p * -0.5),
                (2, 2, -DMatrix::identity(nx, nx)),
            ],
        )
    })
}
