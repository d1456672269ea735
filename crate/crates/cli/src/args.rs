use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sofsyn::sdp::SolverConfig;
use sofsyn::synthesis::{Method, SYNTHESIS_MAX_ITERATIONS};

#[derive(Debug, Parser)]
#[command(
    name = "sofsyn",
    version,
    about = "Robust static output feedback synthesis for Lipschitz nonlinear systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify the open loop, or the loop closed by a given gain.
    Analyze(AnalyzeArgs),
    /// Synthesize a static output feedback gain.
    Synth(SynthArgs),
    /// Roll out the closed loop and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Tolerable nonlinear uncertainty for a synthesized gain.
    Robustness(RobustnessArgs),
    /// Run the embedded benchmark end to end.
    Demo(DemoArgs),
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a positive number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a nonnegative number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn method(s: &str) -> Result<Method, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Strictness margin tau for strict inequalities.
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true, default_value_t = 1e-6)]
    pub tau: f64,
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true, default_value_t = 1e-7)]
    pub feas_tol: f64,
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true, default_value_t = 1e-7)]
    pub gap_tol: f64,
    /// Newton-step budget across both solver phases.
    #[arg(long, value_parser = positive_usize, default_value_t = SYNTHESIS_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            strictness_margin: self.tau,
            feas_tol: self.feas_tol,
            duality_gap_tol: self.gap_tol,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProgramArgs {
    /// Attenuation level mu.
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true, default_value_t = 2.5)]
    pub mu: f64,
    /// Treat mu as a decision variable (its square is minimized).
    #[arg(long, conflicts_with = "gamma_fixed")]
    pub optimize_mu: bool,
    /// Test feasibility at this Lipschitz constant instead of maximizing it.
    #[arg(long, value_parser = nonnegative_f64, allow_hyphen_values = true)]
    pub gamma_fixed: Option<f64>,
    /// Add P <= (1 - tau) I (the default).
    #[arg(long, overrides_with = "no_bound_p")]
    pub bound_p: bool,
    /// Solve the inequalities without the P <= (1 - tau) I block.
    #[arg(long, overrides_with = "bound_p")]
    pub no_bound_p: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

impl ProgramArgs {
    pub fn bound_p(&self) -> bool {
        !self.no_bound_p
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// System description (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Gain to close the loop with: a results file or a bare matrix.
    #[arg(long)]
    pub gain: Option<PathBuf>,
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Results JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// System description (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// lemma3, theorem1, corollary1 or corollary2.
    #[arg(long, value_parser = method, default_value = "corollary1")]
    pub method: Method,
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Uniform weight c_ij for the matrix-valued bound.
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true, conflicts_with = "weights")]
    pub weight: Option<f64>,
    /// Weight matrix c_ij (JSON array of rows) for the matrix-valued bound.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Results JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RolloutArgs {
    /// Number of steps; the trajectory holds steps + 1 rows.
    #[arg(long, value_parser = positive_usize, default_value_t = 200)]
    pub steps: usize,
    /// Initial state: "random" (unit sphere), "zero", or comma-separated values.
    #[arg(long, default_value = "random", allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// zero, switching, sinusoid:OMEGA or sinusoid:OMEGA:PHASE.
    #[arg(long, default_value = "switching")]
    pub uncertainty: String,
    /// zero, impulse:AMPLITUDE, random:HORIZON:AMPLITUDE or file:PATH.
    #[arg(long, default_value = "zero")]
    pub disturbance: String,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// System description (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Results file from `synth` or a bare gain matrix.
    #[arg(long)]
    pub gain: PathBuf,
    #[command(flatten)]
    pub rollout: RolloutArgs,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// SVG plot of the state trajectories.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    /// System description (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Results file from `synth` (must carry gamma_star).
    #[arg(long)]
    pub gain: PathBuf,
    /// Lipschitz constant of the nominal nonlinearity; defaults to the system file.
    #[arg(long, value_parser = nonnegative_f64, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Monte Carlo trials at 0.9 times the margin; 0 skips the check.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Results JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    /// corollary1 or theorem1.
    #[arg(long, value_parser = method, default_value = "corollary1")]
    pub method: Method,
    /// Run the fixed-gamma feasibility test at this value as well.
    #[arg(long, value_parser = nonnegative_f64, allow_hyphen_values = true)]
    pub gamma_fixed: Option<f64>,
    /// Add P <= (1 - tau) I to the benchmark program.
    #[arg(long)]
    pub bound_p: bool,
    #[arg(long, value_parser = positive_usize, default_value_t = 60)]
    pub steps: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Directory for the results JSON, trajectory CSV and SVG.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
