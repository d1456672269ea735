use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sofsyn::linalg::{spectral_norm, LinalgError};
use sofsyn::robustness::{
    admissible_perturbation_check, check_hadamard_lemma, elementwise_bounds, hadamard_lemma_slack,
    jacobian_margin_check, normwise_margin, RobustnessReport,
};
use sofsyn::Matrix;

fn nonnegative(rng: &mut impl Rng, n: usize, hi: f64) -> Matrix {
    Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.random_range(0.0..hi)).collect()).unwrap()
}

/// Entries of `t` with random signs and magnitudes shrunk by up to `shrink`.
fn dominated(rng: &mut impl Rng, t: &Matrix, shrink: f64) -> Matrix {
    let (r, c) = t.shape();
    let data = (0..r * c)
        .map(|idx| {
            let (i, j) = (idx / c, idx % c);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * t.get(i, j) * rng.random_range(shrink..=1.0)
        })
        .collect();
    Matrix::from_row_major(r, c, data).unwrap()
}

#[test]
fn hadamard_bound_holds_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for n in [2, 3, 5, 8] {
        for _ in 0..10_000 {
            let t = nonnegative(&mut rng, n, 3.0);
            let s = dominated(&mut rng, &t, 0.0);
            assert!(check_hadamard_lemma(&s, &t).unwrap(), "n = {n}");
        }
    }
}

#[test]
fn hadamard_bound_is_tight_for_rank_one_sign_patterns() {
    // all-ones T with S = T: S S' = n 11', and (T T') o (n I) = n^2 I
    let n = 4;
    let t = Matrix::filled(n, n, 1.0);
    let slack = hadamard_lemma_slack(&t, &t).unwrap();
    assert!(slack.abs() <= 1e-10, "slack {slack}");
}

#[test]
fn hadamard_bound_rejects_undominated_inputs() {
    let t = Matrix::identity(2);
    let s = Matrix::filled(2, 2, 0.5);
    assert!(matches!(
        check_hadamard_lemma(&s, &t),
        Err(LinalgError::Precondition(_))
    ));
    assert!(matches!(
        check_hadamard_lemma(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)),
        Err(LinalgError::DimensionMismatch { .. })
    ));
}

#[test]
fn admissible_perturbations_stay_below_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    for n in [2, 3, 5, 8] {
        let root = (n as f64).sqrt();
        for _ in 0..2_000 {
            let gs = nonnegative(&mut rng, n, 2.0);
            let delta = dominated(&mut rng, &gs.scale(1.0 / root), 0.0);
            assert!(admissible_perturbation_check(&delta, &gs).unwrap());
            assert!(spectral_norm(&delta) <= spectral_norm(&gs) + 1e-10);
        }
    }
}

#[test]
fn oversized_perturbations_are_not_admissible() {
    let gs = Matrix::filled(3, 3, 1.0);
    let delta = Matrix::filled(3, 3, 0.6);
    assert!(!admissible_perturbation_check(&delta, &gs).unwrap());
}

#[test]
fn interval_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(406);
    for n in [2, 3, 5] {
        let root = (n as f64).sqrt();
        let g = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let gs = nonnegative(&mut rng, n, 2.0);
        let (lo, hi) = elementwise_bounds(&g, &gs).unwrap();
        assert!((&(&hi - &lo) - &gs.scale(2.0 / root)).max_abs() <= 1e-14);
        assert!(((&hi + &lo).scale(0.5) + g.clone()).max_abs() <= 1e-14);
        for i in 0..n {
            for j in 0..n {
                assert!(lo.get(i, j) <= hi.get(i, j));
            }
        }
    }
    let negative = Matrix::from_rows(&[[1.0, -0.1], [0.0, 1.0]]).unwrap();
    assert!(elementwise_bounds(&Matrix::zeros(2, 2), &negative).is_err());
}

#[test]
fn normwise_margin_and_report() {
    assert!((normwise_margin(0.3, 0.0468) + 0.2532).abs() < 1e-12);
    assert!(jacobian_margin_check(0.0, 0.0));
    assert!(!jacobian_margin_check(1e-9, -0.2));
    let report = RobustnessReport::new(0.1, 0.4)
        .with_matrices(Matrix::filled(2, 2, 0.1), Matrix::filled(2, 2, 0.4))
        .unwrap();
    assert!((report.normwise_margin - 0.3).abs() < 1e-12);
    let json: serde_json::Value = serde_json::from_str(&report.to_json_string()).unwrap();
    assert!(json["elementwise_upper"].is_object() || json["elementwise_upper"].is_array());
}
