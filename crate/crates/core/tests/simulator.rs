use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sofsyn::simulator::{
    dissipation, dynamics_residual, empirical_l2_gain, lyapunov_decrement_check, monte_carlo_robustness,
    random_on_sphere, random_sinusoid_perturbation, simulate, sinusoid_lipschitz, MonteCarloConfig, SimulationError,
};
use sofsyn::synthesis::{synthesize, Method, SynthesisRequest};
use sofsyn::system::{
    estimate_lipschitz, paper_example, DisturbanceSignal, NonlinearityDescriptor, UncertainSystem, UncertaintySignal,
};
use sofsyn::Matrix;

fn toy(a: f64) -> UncertainSystem {
    UncertainSystem::new(
        Matrix::identity(2).scale(a),
        Matrix::from_rows(&[[1.0], [0.0]]).unwrap(),
        Matrix::from_rows(&[[1.0], [0.0]]).unwrap(),
        Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
        Matrix::zeros(1, 1),
        Matrix::identity(2),
        Matrix::from_rows(&[[0.0], [0.1]]).unwrap(),
        Matrix::zeros(1, 1),
        Matrix::from_rows(&[[0.0, 0.1]]).unwrap(),
        NonlinearityDescriptor::none(),
    )
    .unwrap()
}

fn benchmark_gain() -> (UncertainSystem, sofsyn::synthesis::SynthesisResult) {
    let sys = paper_example();
    let res = synthesize(
        &sys,
        &SynthesisRequest::new(Method::Corollary1, 2.5).with_bound_p(false),
    )
    .unwrap();
    (sys, res)
}

#[test]
fn open_loop_decay_matches_closed_form() {
    let sys = toy(0.5);
    let x0 = [1.0, -2.0];
    let traj = simulate(
        &sys,
        &Matrix::zeros(1, 1),
        &sys.phi,
        &UncertaintySignal::Zero,
        &DisturbanceSignal::Zero,
        &x0,
        30,
        None,
    )
    .unwrap();
    for r in &traj.records {
        let c = 0.5f64.powi(r.k as i32);
        assert!((r.x[0] - c * x0[0]).abs() <= 1e-15 && (r.x[1] - c * x0[1]).abs() <= 1e-15);
        assert_eq!(r.u, vec![0.0]);
    }
}

#[test]
fn zero_state_and_input_stay_at_rest() {
    let (sys, res) = benchmark_gain();
    let traj = simulate(
        &sys,
        res.k.as_ref().unwrap(),
        &sys.phi,
        &UncertaintySignal::RandomSwitching { seed: 1 },
        &DisturbanceSignal::Zero,
        &[0.0; 5],
        50,
        None,
    )
    .unwrap();
    assert!(traj.records.iter().all(|r| r.x.iter().all(|&v| v == 0.0)));
}

#[test]
fn impulse_gain_of_a_pure_delay() {
    let sys = toy(0.0);
    let w = DisturbanceSignal::Impulse { amplitude: 3.0, at: 0 };
    let gain = empirical_l2_gain(&sys, &Matrix::zeros(1, 1), &sys.phi, &UncertaintySignal::Zero, &[w], 10).unwrap();
    assert!((gain - 1.0).abs() <= 1e-15);
}

#[test]
fn zero_energy_disturbances_are_rejected() {
    let sys = toy(0.5);
    let err = empirical_l2_gain(
        &sys,
        &Matrix::zeros(1, 1),
        &sys.phi,
        &UncertaintySignal::Zero,
        &[
            DisturbanceSignal::Impulse { amplitude: 1.0, at: 0 },
            DisturbanceSignal::Zero,
        ],
        10,
    )
    .unwrap_err();
    assert!(matches!(err, SimulationError::ZeroEnergy { index: 1 }));
}

#[test]
fn linear_rollouts_are_homogeneous() {
    let sys = toy(0.9);
    let k = Matrix::from_rows(&[[-0.4]]).unwrap();
    let f = UncertaintySignal::RandomSwitching { seed: 5 };
    let w = DisturbanceSignal::FiniteRandom {
        seed: 6,
        horizon: 20,
        amplitude: 1.0,
    };
    let x0 = [0.3, -0.7];
    let base = simulate(&sys, &k, &sys.phi, &f, &w, &x0, 40, None).unwrap();
    let c = -2.5;
    let scaled = simulate(&sys, &k, &sys.phi, &f, &w.scaled(c), &[c * x0[0], c * x0[1]], 40, None).unwrap();
    for (a, b) in base.records.iter().zip(&scaled.records) {
        for (xa, xb) in a.x.iter().zip(&b.x) {
            assert!((c * xa - xb).abs() <= 1e-9 * (1.0 + xb.abs()));
        }
    }
}

#[test]
fn replay_reproduces_the_dynamics() {
    let (sys, res) = benchmark_gain();
    let k = res.k.unwrap();
    let f = UncertaintySignal::Sinusoidal { omega: 0.7, phase: 0.2 };
    let w = DisturbanceSignal::FiniteRandom {
        seed: 3,
        horizon: 40,
        amplitude: 0.5,
    };
    let traj = simulate(&sys, &k, &sys.phi, &f, &w, &[1.0, -1.0, 0.5, 0.0, 2.0], 100, None).unwrap();
    assert!(dynamics_residual(&sys, &k, &sys.phi, &f, &traj) <= 1e-12);
}

#[test]
fn rollouts_are_deterministic() {
    let (sys, res) = benchmark_gain();
    let k = res.k.unwrap();
    let run = || {
        let f = UncertaintySignal::RandomSwitching { seed: 11 };
        let w = DisturbanceSignal::FiniteRandom {
            seed: 12,
            horizon: 30,
            amplitude: 1.0,
        };
        simulate(&sys, &k, &sys.phi, &f, &w, &[0.1; 5], 60, res.p.as_ref())
            .unwrap()
            .to_csv()
    };
    assert_eq!(run(), run());
}

#[test]
fn open_loop_benchmark_fails_the_decrement_test() {
    let (sys, res) = benchmark_gain();
    let traj = simulate(
        &sys,
        &Matrix::zeros(3, 2),
        &sys.phi,
        &UncertaintySignal::Zero,
        &DisturbanceSignal::Zero,
        &[1.0, 1.0, 1.0, 1.0, 1.0],
        100,
        res.p.as_ref(),
    );
    let (ok, at) = match traj {
        Ok(t) => lyapunov_decrement_check(&t, 1e-8),
        Err(SimulationError::Diverged { partial, .. }) => lyapunov_decrement_check(&partial, 1e-8),
        Err(e) => panic!("{e}"),
    };
    assert!(!ok);
    assert!(at.is_some());
}

#[test]
fn closed_loop_dissipates_from_rest() {
    let (sys, res) = benchmark_gain();
    let k = res.k.unwrap();
    for seed in 0..10 {
        let w = DisturbanceSignal::FiniteRandom {
            seed,
            horizon: 50,
            amplitude: 1.0,
        };
        let f = UncertaintySignal::RandomSwitching { seed: 100 + seed };
        let traj = simulate(&sys, &k, &sys.phi, &f, &w, &[0.0; 5], 300, None).unwrap();
        assert!(dissipation(&traj, 2.5) <= 0.0, "seed {seed}");
    }
}

#[test]
fn csv_layout() {
    let sys = toy(0.5);
    let traj = simulate(
        &sys,
        &Matrix::zeros(1, 1),
        &sys.phi,
        &UncertaintySignal::Zero,
        &DisturbanceSignal::Zero,
        &[1.0, 0.0],
        25,
        None,
    )
    .unwrap();
    let csv = traj.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 27);
    assert_eq!(lines[0], "k,x1,x2,u1,y1,z1,z2,w1,V");
    assert_eq!(lines[1].split(',').count(), 9);
    assert!(lines[1].ends_with(','));
}

#[test]
fn divergence_is_reported_with_the_partial_rollout() {
    let sys = toy(10.0);
    let err = simulate(
        &sys,
        &Matrix::zeros(1, 1),
        &sys.phi,
        &UncertaintySignal::Zero,
        &DisturbanceSignal::Zero,
        &[1.0, 1.0],
        100,
        None,
    )
    .unwrap_err();
    match err {
        SimulationError::Diverged { step, partial, .. } => assert_eq!(partial.records.len(), step),
        other => panic!("{other}"),
    }
}

#[test]
fn sphere_samples_and_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let v = random_on_sphere(&mut rng, 5, 2.0);
        assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 2.0).abs() <= 1e-12);
        let phi = random_sinusoid_perturbation(&mut rng, 5, 0.2);
        assert!(estimate_lipschitz(&phi, 1.0, 200, 1) <= 0.2 + 1e-12);
    }
    assert!((sinusoid_lipschitz(&[0.3, 0.1, 0.0, 0.0, 0.0], &[2, 3, 0, 0, 1]) - 0.3).abs() <= 1e-12);
    assert!((sinusoid_lipschitz(&[0.3, 0.4], &[0, 0]) - 0.5).abs() <= 1e-12);
}

#[test]
fn monte_carlo_with_zero_perturbation_is_nominal() {
    let (sys, res) = benchmark_gain();
    let k = res.k.unwrap();
    let cfg = MonteCarloConfig::default();
    let a = monte_carlo_robustness(&sys, &k, &sys.phi, 0.0, 20, 3, cfg).unwrap();
    assert_eq!(a.trials, 20);
    assert_eq!(a.stable, 20);
    let b = monte_carlo_robustness(&sys, &k, &sys.phi, 0.0, 20, 3, cfg).unwrap();
    assert_eq!(a, b);
    assert!(monte_carlo_robustness(&sys, &k, &sys.phi, -0.1, 5, 3, cfg).is_err());
}
