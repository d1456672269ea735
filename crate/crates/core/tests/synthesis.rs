use sofsyn::linalg::{spectral_norm, LinalgError};
use sofsyn::sdp::SdpStatus;
use sofsyn::synthesis::{
    analyze_lemma3, lower, solve_gain_kronecker, synthesize, transform_feedthrough, AutonomousSystem, GainRecovery,
    Method, MuMode, SynthesisError, SynthesisRequest,
};
use sofsyn::system::{paper_example, NonlinearityDescriptor};
use sofsyn::{Matrix, SymmetricMatrix};

fn diagonal_system(a: f64) -> AutonomousSystem {
    AutonomousSystem {
        a: Matrix::identity(2).scale(a),
        b: Matrix::from_rows(&[[0.1], [0.1]]).unwrap(),
        h: Matrix::identity(2).scale(0.1),
        m1: Matrix::identity(2).scale(0.1),
        n: Matrix::identity(2).scale(0.1),
    }
}

fn printed(method: Method, mu: f64) -> SynthesisRequest {
    SynthesisRequest::new(method, mu).with_bound_p(false)
}

#[test]
fn stable_diagonal_plant_is_certified() {
    let res = analyze_lemma3(
        &diagonal_system(0.5),
        &SynthesisRequest::new(Method::Lemma3Analysis, 1.0),
    )
    .unwrap();
    assert_eq!(res.status, SdpStatus::Optimal);
    assert!(res.diagnostics.certificate_valid);
    let gamma = res.gamma_star.unwrap();
    assert!(gamma > 0.0 && gamma < 0.5, "gamma* = {gamma}");
}

#[test]
fn unstable_diagonal_plant_is_rejected() {
    let res = analyze_lemma3(
        &diagonal_system(2.0),
        &SynthesisRequest::new(Method::Lemma3Analysis, 1.0),
    )
    .unwrap();
    assert_eq!(res.status, SdpStatus::Infeasible);
    assert!(res.gamma_star.is_none() && res.p.is_none());
    assert!(!res.diagnostics.certificate_valid);
}

#[test]
fn fixed_gamma_brackets_the_optimum() {
    let sys = diagonal_system(0.5);
    let base = SynthesisRequest::new(Method::Lemma3Analysis, 1.0);
    let star = analyze_lemma3(&sys, &base).unwrap().gamma_star.unwrap();
    let below = analyze_lemma3(&sys, &base.clone().with_gamma(0.9 * star)).unwrap();
    assert_eq!(below.status, SdpStatus::Optimal);
    assert_eq!(below.gamma_fixed, Some(0.9 * star));
    assert!(below.gamma_star.is_none());
    let far_above = analyze_lemma3(&sys, &base.with_gamma(10.0 * star)).unwrap();
    assert_eq!(far_above.status, SdpStatus::Infeasible);
}

#[test]
fn gamma_star_matches_its_formula() {
    let res = synthesize(&paper_example(), &printed(Method::Corollary1, 2.5)).unwrap();
    assert_eq!(res.status, SdpStatus::Optimal);
    let (a, e) = (res.alpha_star.unwrap(), res.eps1_star.unwrap());
    assert!((res.gamma_star.unwrap() - 1.0 / (a * (1.0 + e)).sqrt()).abs() <= 1e-9);
    assert!(res.diagnostics.certificate_valid);
    assert!(res.diagnostics.equality_residual.unwrap() <= 1e-7);
    assert_eq!(res.k.as_ref().unwrap().shape(), (3, 2));
}

#[test]
fn looser_attenuation_never_hurts() {
    let sys = paper_example();
    let mut last = f64::INFINITY;
    for mu in [1.5, 2.5, 5.0] {
        let res = synthesize(&sys, &printed(Method::Corollary1, mu)).unwrap();
        assert_eq!(res.status, SdpStatus::Optimal, "mu = {mu}");
        let obj = res.alpha_star.unwrap() + res.eps1_star.unwrap();
        assert!(obj <= last * (1.0 + 1e-6), "mu = {mu}: {obj} > {last}");
        last = obj;
    }
}

#[test]
fn tight_attenuation_is_infeasible() {
    let res = synthesize(&paper_example(), &printed(Method::Corollary1, 0.01)).unwrap();
    assert_eq!(res.status, SdpStatus::Infeasible);
    assert!(res.k.is_none());
}

#[test]
fn zero_lipschitz_constant_is_feasible() {
    let mut sys = paper_example();
    sys.phi = NonlinearityDescriptor::none();
    let res = synthesize(&sys, &SynthesisRequest::new(Method::Corollary1, 2.5).with_gamma(0.0)).unwrap();
    assert_eq!(res.status, SdpStatus::Optimal);
    assert!(res.diagnostics.certificate_valid);
    assert!(res.k.is_some());
}

#[test]
fn theorem1_reports_gain_recovery() {
    let res = synthesize(&paper_example(), &printed(Method::Theorem1, 2.5)).unwrap();
    assert_eq!(res.status, SdpStatus::Optimal);
    assert_eq!(res.g.as_ref().unwrap().shape(), (5, 2));
    let k = res.k.as_ref().unwrap();
    assert_eq!(k.shape(), (3, 2));
    match res.gain_recovery {
        GainRecovery::Exact => assert_eq!(res.rank_condition_holds, Some(true)),
        GainRecovery::LeastSquares { residual } => {
            assert_eq!(res.rank_condition_holds, Some(false));
            assert!(residual > 0.0);
        }
        ref other => panic!("unexpected recovery {other:?}"),
    }
}

#[test]
fn corollary2_returns_a_nonnegative_bound() {
    let req = printed(Method::Corollary2, 2.5).with_weights(Matrix::filled(5, 5, 1.0));
    let res = synthesize(&paper_example(), &req).unwrap();
    assert_eq!(res.status, SdpStatus::Optimal);
    assert!(res.diagnostics.certificate_valid);
    assert!(res.gamma_star.is_none());
    let gm = res.gamma_matrix.unwrap();
    assert!(gm.as_slice().iter().all(|&x| x >= 0.0));
    assert!(res.omega.unwrap() > 0.0);
}

#[test]
fn invalid_requests() {
    let sys = paper_example();
    let err = synthesize(&sys, &SynthesisRequest::new(Method::Corollary1, -1.0)).unwrap_err();
    assert!(matches!(err, SynthesisError::InvalidRequest(ref m) if m.contains("mu")));
    let mut req = SynthesisRequest::new(Method::Corollary1, 1.0);
    req.mu_mode = MuMode::Optimize;
    req.w2 = 0.0;
    assert!(matches!(synthesize(&sys, &req), Err(SynthesisError::Unbounded(_))));
    let req = SynthesisRequest::new(Method::Corollary2, 1.0);
    assert!(matches!(synthesize(&sys, &req), Err(SynthesisError::InvalidRequest(_))));
    let wrong = SynthesisRequest::new(Method::Theorem1, 1.0);
    assert!(sofsyn::synthesis::synth_corollary1(&sys, &wrong).is_err());
    assert!(AutonomousSystem::closed_loop(&sys, &Matrix::zeros(2, 3)).is_err());
}

#[test]
fn lowered_program_sizes() {
    let sys = paper_example();
    let printed = lower(&sys, &printed(Method::Corollary1, 2.5)).unwrap();
    assert_eq!(printed.num_vars, 33);
    assert_eq!(printed.eq_rows.len(), 15);
    let sizes: Vec<usize> = printed.blocks.iter().map(|b| b.dim()).collect();
    assert_eq!(sizes, vec![5, 1, 1, 1, 22, 11, 6]);
    let bounded = lower(&sys, &SynthesisRequest::new(Method::Corollary1, 2.5)).unwrap();
    assert_eq!(bounded.blocks.len(), 8);
}

#[test]
fn kronecker_gain_consistent_case() {
    let p = SymmetricMatrix::from_matrix(
        &Matrix::from_rows(&[[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]]).unwrap(),
        0.0,
    )
    .unwrap();
    let b1 = Matrix::from_rows(&[[1.0, 0.0], [0.5, 1.0], [0.0, 2.0]]).unwrap();
    let kbar = Matrix::from_rows(&[[0.2, -0.1], [0.0, 0.4], [1.0, 0.3]]).unwrap();
    let g = &(&(&p.to_matrix() * &b1) * &b1.transpose()) * &kbar;
    let sol = solve_gain_kronecker(&p, &b1, &g).unwrap();
    assert!(sol.rank_condition);
    assert!(sol.residual <= 1e-10);
}

#[test]
fn kronecker_gain_projects_inconsistent_targets() {
    let b1 = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
    let p = SymmetricMatrix::identity(3);
    let g = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.5, -0.5]]).unwrap();
    let sol = solve_gain_kronecker(&p, &b1, &g).unwrap();
    assert!(!sol.rank_condition);
    let bottom = Matrix::from_rows(&[[0.5, -0.5]]).unwrap();
    assert!((sol.residual - spectral_norm(&bottom)).abs() <= 1e-12);
    let k = &b1.transpose() * &sol.kbar;
    let top = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    assert!((&k - &top).max_abs() <= 1e-12);
}

#[test]
fn kronecker_gain_rejects_mismatched_shapes() {
    let err = solve_gain_kronecker(
        &SymmetricMatrix::identity(3),
        &Matrix::zeros(2, 1),
        &Matrix::zeros(3, 1),
    );
    assert!(matches!(err, Err(LinalgError::DimensionMismatch { .. })));
}

#[test]
fn feedthrough_transform() {
    let k = Matrix::from_rows(&[[2.0]]).unwrap();
    let out = transform_feedthrough(&k, &Matrix::from_rows(&[[0.5]]).unwrap()).unwrap();
    assert!((out.get(0, 0) - 1.0).abs() <= 1e-15);
    let kk = Matrix::from_rows(&[[1.0, 2.0], [0.0, 3.0]]).unwrap();
    assert_eq!(transform_feedthrough(&kk, &Matrix::zeros(2, 2)).unwrap(), kk);
    let singular = transform_feedthrough(
        &Matrix::from_rows(&[[1.0]]).unwrap(),
        &Matrix::from_rows(&[[-1.0]]).unwrap(),
    );
    assert!(matches!(singular, Err(LinalgError::Singular)));
}
