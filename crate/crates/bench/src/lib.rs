//! Fixtures shared by the benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sofsyn::sdp::{smat, svec_len, LmiBlock, SdpProblem};
use sofsyn::{Matrix, SymmetricMatrix};

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("square data")
}

fn sym(m: &Matrix) -> SymmetricMatrix {
    SymmetricMatrix::from_matrix(m, 1e-12).expect("symmetric by construction")
}

/// minimize t subject to A + t I >= 0 for a random symmetric A.
pub fn lambda_min_problem(n: usize, seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = random_matrix(&mut rng, n);
    let a = (&b + &b.transpose()).scale(0.5);
    let mut p = SdpProblem::new(1);
    p.objective = vec![1.0];
    p.add_block(LmiBlock::new("shift", sym(&-&a)).with_term(0, sym(&Matrix::identity(n).scale(-1.0))));
    p
}

/// Lyapunov feasibility `P > 0`, `A'PA - P < 0` for a random A scaled to spectral norm `norm`.
pub fn lyapunov_problem(n: usize, norm: f64, seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = random_matrix(&mut rng, n);
    let a = b.scale(norm / sofsyn::linalg::spectral_norm(&b));
    let nv = svec_len(n);
    let mut p = SdpProblem::new(nv);
    let mut pos = LmiBlock::new("P > 0", SymmetricMatrix::zeros(n));
    let mut dec = LmiBlock::new("decrease", SymmetricMatrix::zeros(n));
    for k in 0..nv {
        let mut e = vec![0.0; nv];
        e[k] = 1.0;
        let basis = smat(n, &e).to_matrix();
        pos = pos.with_term(k, sym(&-&basis));
        dec = dec.with_term(k, sym(&(&(&a.transpose() * &basis) * &a - basis.clone())));
    }
    p.add_block(pos);
    p.add_block(dec);
    p
}
