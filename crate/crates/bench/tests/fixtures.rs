use sofsyn::sdp::{solve, SdpStatus, SolverConfig};
use sofsyn_bench::{lambda_min_problem, lyapunov_problem};

#[test]
fn fixtures_solve() {
    let cfg = SolverConfig::default();
    for n in [4, 8, 16] {
        assert_eq!(solve(&lambda_min_problem(n, n as u64), &cfg).status, SdpStatus::Optimal);
    }
    // spectral norm below one certifies P = I
    for n in [3, 5, 8] {
        assert_eq!(solve(&lyapunov_problem(n, 0.9, 1), &cfg).status, SdpStatus::Optimal);
    }
}
