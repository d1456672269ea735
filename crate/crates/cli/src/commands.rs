use std::path::PathBuf;

use serde_json::{json, Value};
use sofsyn::robustness::RobustnessReport;
use sofsyn::simulator::{monte_carlo_robustness, simulate as rollout, MonteCarloConfig, SimulationError, Trajectory};
use sofsyn::synthesis::{
    analyze_lemma3, synthesize, AutonomousSystem, GainRecovery, Method, MuMode, SynthesisError, SynthesisRequest,
    SynthesisResult,
};
use sofsyn::system::{paper_example, UncertainSystem};
use sofsyn::{Matrix, SymmetricMatrix};

use crate::args::{AnalyzeArgs, DemoArgs, ProgramArgs, RobustnessArgs, RolloutArgs, SimulateArgs, SynthArgs};
use crate::{files, svg, Failure};

fn request(method: Method, program: &ProgramArgs) -> SynthesisRequest {
    let mut req = SynthesisRequest::new(method, program.mu).with_bound_p(program.bound_p());
    if program.optimize_mu {
        req.mu_mode = MuMode::Optimize;
    }
    if let Some(g) = program.gamma_fixed {
        req = req.with_gamma(g);
    }
    req.solver = program.solver.config();
    req
}

fn rejected(e: SynthesisError) -> Failure {
    Failure::Input(e.to_string())
}

fn verdict(res: &SynthesisResult) -> Result<(), Failure> {
    if res.is_feasible() {
        Ok(())
    } else {
        Err(Failure::Unsuccessful(format!(
            "{:?}: solver returned {:?} after {} Newton steps",
            res.method, res.status, res.diagnostics.iterations
        )))
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn summary(res: &SynthesisResult) -> String {
    let mut s = format!("status {:?} ({} Newton steps)", res.status, res.diagnostics.iterations);
    if let Some(g) = res.gamma_fixed {
        s += &format!(
            ", gamma {g} {}",
            if res.is_feasible() { "feasible" } else { "infeasible" }
        );
    } else {
        s += &format!(
            ", alpha* {}, eps1* {}, gamma* {}",
            fmt_opt(res.alpha_star),
            fmt_opt(res.eps1_star),
            fmt_opt(res.gamma_star)
        );
    }
    s
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let sys = files::system(&args.system)?;
    let loop_sys = match &args.gain {
        Some(path) => AutonomousSystem::closed_loop(&sys, &files::gain(path)?.k).map_err(rejected)?,
        None => AutonomousSystem::open_loop(&sys),
    };
    let req = request(Method::Lemma3Analysis, &args.program);
    let res = analyze_lemma3(&loop_sys, &req).map_err(rejected)?;
    let doc = files::document("analyze", json!({ "closed_loop": args.gain.is_some(), "result": res }));
    files::emit_json(args.out.as_ref(), &doc)?;
    if args.out.is_some() {
        println!("{}", summary(&res));
    }
    verdict(&res)
}

pub fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let sys = files::system(&args.system)?;
    let mut req = request(args.method, &args.program);
    if let Some(c) = args.weight {
        req = req.with_weights(Matrix::filled(sys.dims.n, sys.dims.n, c));
    }
    if let Some(path) = &args.weights {
        req = req.with_weights(files::matrix(path)?);
    }
    let res = synthesize(&sys, &req).map_err(rejected)?;
    let doc = files::document("synth", json!({ "request": req, "result": res }));
    files::emit_json(args.out.as_ref(), &doc)?;
    if args.out.is_some() {
        println!("{}", summary(&res));
    }
    verdict(&res)
}

/// Runs a rollout; a divergent run still yields its partial trajectory.
fn run_rollout(
    sys: &UncertainSystem,
    k: &Matrix,
    p: Option<&SymmetricMatrix>,
    opts: &RolloutArgs,
) -> Result<(Trajectory, Option<String>), Failure> {
    let x0 = files::initial_state(&opts.x0, sys.dims.n, opts.seed)?;
    let f = files::uncertainty(&opts.uncertainty, opts.seed)?;
    let w = files::disturbance(&opts.disturbance, opts.seed)?;
    let p = p.filter(|p| p.dim() == sys.dims.n);
    match rollout(sys, k, &sys.phi, &f, &w, &x0, opts.steps, p) {
        Ok(t) => Ok((t, None)),
        Err(SimulationError::Diverged { step, partial, .. }) => {
            Ok((*partial, Some(format!("state diverged at step {step}"))))
        }
        Err(e) => Err(Failure::Input(e.to_string())),
    }
}

fn state_plot(traj: &Trajectory, title: &str) -> String {
    let n = traj.records.first().map_or(0, |r| r.x.len());
    let series: Vec<(String, Vec<f64>)> = (0..n)
        .map(|i| (format!("x{}", i + 1), traj.records.iter().map(|r| r.x[i]).collect()))
        .collect();
    svg::line_chart(title, &series)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let sys = files::system(&args.system)?;
    let gain = files::gain(&args.gain)?;
    if gain.k.shape() != (sys.dims.m, sys.dims.p) {
        return Err(Failure::Input(format!(
            "gain: expected {}x{}, got {}x{}",
            sys.dims.m,
            sys.dims.p,
            gain.k.rows(),
            gain.k.cols()
        )));
    }
    let (traj, diverged) = run_rollout(&sys, &gain.k, gain.p.as_ref(), &args.rollout)?;
    files::write(&args.out, &traj.to_csv())?;
    if let Some(plot) = &args.plot {
        files::write(plot, &state_plot(&traj, "closed-loop states"))?;
    }
    match diverged {
        Some(msg) => Err(Failure::Unsuccessful(msg)),
        None => {
            let fin = traj.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
            println!("{} rows written, |x({})| = {fin:.3e}", traj.records.len(), traj.horizon);
            Ok(())
        }
    }
}

pub fn robustness(args: &RobustnessArgs) -> Result<(), Failure> {
    let sys = files::system(&args.system)?;
    let gain = files::gain(&args.gain)?;
    let gamma_star = gain
        .result
        .as_ref()
        .and_then(|r| r.gamma_star)
        .ok_or_else(|| Failure::Input("gain: results file carries no gamma_star".into()))?;
    let gamma = args.gamma.or(sys.gamma).unwrap_or(sys.phi.declared_lipschitz);
    let report = RobustnessReport::new(gamma, gamma_star);
    let level = 0.9 * report.normwise_margin;
    let monte_carlo = if level > 0.0 && args.trials > 0 {
        let mc = monte_carlo_robustness(
            &sys,
            &gain.k,
            &sys.phi,
            level,
            args.trials,
            args.seed,
            MonteCarloConfig::default(),
        )
        .map_err(|e| Failure::Input(e.to_string()))?;
        json!({
            "perturbation_lipschitz": level,
            "trials": mc.trials,
            "stable": mc.stable,
            "fraction_stable": mc.fraction_stable,
        })
    } else {
        Value::Null
    };
    let doc = files::document("robustness", json!({ "report": report, "monte_carlo": monte_carlo }));
    files::emit_json(args.out.as_ref(), &doc)?;
    if report.normwise_margin <= 0.0 {
        return Err(Failure::Unsuccessful(format!(
            "no certified margin: gamma* = {gamma_star:.6} does not exceed gamma = {gamma}"
        )));
    }
    if args.out.is_some() {
        println!(
            "margin {:.6} (gamma* {gamma_star:.6} - gamma {gamma})",
            report.normwise_margin
        );
    }
    Ok(())
}

fn print_matrix(name: &str, m: &Matrix) {
    println!("{name} =");
    for row in m.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>11.5}")).collect();
        println!("  [{}]", cells.join(" "));
    }
}

pub fn demo(args: &DemoArgs) -> Result<(), Failure> {
    if !matches!(args.method, Method::Corollary1 | Method::Theorem1) {
        return Err(Failure::Input("method: the demo runs corollary1 or theorem1".into()));
    }
    let sys = paper_example();
    let mu = 2.5;
    let req = SynthesisRequest::new(args.method, mu).with_bound_p(args.bound_p);
    let res = synthesize(&sys, &req).map_err(rejected)?;
    println!(
        "benchmark plant, {:?}, mu = {mu}, P <= (1 - tau) I {}",
        args.method,
        if args.bound_p { "on" } else { "off" }
    );
    println!("{}", summary(&res));
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let out = |name: &str| args.out_dir.join(name);
    files::emit_json(
        Some(&out("demo_result.json")),
        &files::document("demo", json!({ "request": req, "result": res })),
    )?;
    verdict(&res)?;

    if let Some(k) = &res.k {
        print_matrix("K", k);
    }
    if args.method == Method::Theorem1 {
        let rank = res.rank_condition_holds.map_or("-".into(), |b| b.to_string());
        let how = match &res.gain_recovery {
            GainRecovery::Exact => "exact".to_string(),
            GainRecovery::LeastSquares { residual } => format!("least squares, residual {residual:.3e}"),
            GainRecovery::Failed { reason } => format!("failed: {reason}"),
            GainRecovery::NotApplicable => "n/a".to_string(),
        };
        println!("rank condition: {rank} ({how})");
    }
    let gamma = sys.gamma.unwrap_or(sys.phi.declared_lipschitz);
    if let Some(gs) = res.gamma_star {
        let report = RobustnessReport::new(gamma, gs);
        println!(
            "nominal Lipschitz constant {gamma}, normwise margin gamma* - gamma = {:.6}",
            report.normwise_margin
        );
    }

    let Some(k) = res.k.clone() else {
        return Err(Failure::Unsuccessful("no gain could be recovered".into()));
    };
    let opts = RolloutArgs {
        steps: args.steps,
        x0: "random".into(),
        seed: args.seed,
        uncertainty: "switching".into(),
        disturbance: "zero".into(),
    };
    let (traj, diverged) = run_rollout(&sys, &k, res.p.as_ref(), &opts)?;
    files::write(&out("demo_trajectory.csv"), &traj.to_csv())?;
    files::write(&out("demo_trajectory.svg"), &state_plot(&traj, "benchmark closed loop"))?;
    let fin = traj.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
    println!(
        "trajectory: {} steps from a random unit x0 (seed {}), |x(end)| = {fin:.3e}",
        traj.horizon, args.seed
    );
    println!(
        "wrote {}",
        display_paths(&[
            out("demo_result.json"),
            out("demo_trajectory.csv"),
            out("demo_trajectory.svg")
        ])
    );
    if let Some(msg) = diverged {
        return Err(Failure::Unsuccessful(msg));
    }

    if let Some(g) = args.gamma_fixed {
        let fixed = synthesize(&sys, &req.clone().with_gamma(g)).map_err(rejected)?;
        let word = if fixed.is_feasible() { "feasible" } else { "infeasible" };
        println!("gamma fixed at {g}: {word} ({:?})", fixed.status);
        if !fixed.is_feasible() {
            return Err(Failure::Unsuccessful(format!("gamma fixed at {g} is infeasible")));
        }
    }
    Ok(())
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
