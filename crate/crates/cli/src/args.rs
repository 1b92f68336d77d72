use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pll_lockin::TRIANGULAR_SLOPE;

#[derive(Debug, Parser)]
#[command(
    name = "pll-lockin",
    version,
    about = "Lock-in range of a PLL with impulse signals and an active PI filter",
    args_override_self = true
)]
pub struct Cli {
    /// File of `key = value` lines mirroring the long flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lock-in frequency at a single parameter point.
    Lockin(LockinArgs),
    /// Lock-in frequency over a grid of K0/τ1 and τ2 values, as CSV.
    Sweep(SweepArgs),
    /// Integrate the phase or equivalent model and export the trajectory.
    Simulate(SimulateArgs),
    /// Frequency-step test: does the loop re-lock without slipping a cycle?
    CheckLockin(CheckArgs),
    /// Trace the separatrix back from the saddle and export it.
    TraceSeparatrix(TraceArgs),
    /// Waveform-level simulation with square-wave signals.
    SignalSim(SignalArgs),
    /// Phase gap between the waveform-level and averaged models.
    CompareModels(CompareArgs),
    /// Equilibria with their eigenvalues and eigenvectors.
    Equilibria(EquilibriaArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LoopArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau2: f64,
    /// Loop gain K0 = Kv·Kd (1/s).
    #[arg(long, allow_negative_numbers = true)]
    pub k0: f64,
    /// Rising slope of the zigzag characteristic; 2/π is the triangle wave.
    #[arg(long, default_value_t = TRIANGULAR_SLOPE, allow_negative_numbers = true)]
    pub slope_k: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long)]
    pub max_time: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Emit a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
    /// Omit the timestamp so that repeated runs are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Analytic,
    Numeric,
    Both,
}

#[derive(Debug, Args)]
pub struct LockinArgs {
    #[command(flatten)]
    pub loop_args: LoopArgs,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// K0/τ1 axis as `min:max:count`, log-spaced.
    #[arg(long, value_name = "MIN:MAX:COUNT")]
    pub x: String,
    /// Comma-separated τ2 values.
    #[arg(long, value_name = "V1,V2,...")]
    pub tau2: String,
    /// τ1 only rescales the axis; the diagram family is covered with τ1 = 1.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau1: f64,
    #[arg(long, default_value_t = TRIANGULAR_SLOPE, allow_negative_numbers = true)]
    pub slope_k: f64,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    /// Add the degenerate-node gain of every τ2 to the axis.
    #[arg(long)]
    pub degenerate_points: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for symmetry with the JSON commands; CSV has no timestamp.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemChoice {
    Phase,
    Equiv,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub loop_args: LoopArgs,
    #[arg(long, value_enum, default_value_t = SystemChoice::Phase)]
    pub system: SystemChoice,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega_delta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta0: f64,
    /// Initial filter state (phase model).
    #[arg(long, allow_negative_numbers = true, conflicts_with = "y0")]
    pub x0: Option<f64>,
    /// Initial phase-error rate (equivalent model).
    #[arg(long, allow_negative_numbers = true)]
    pub y0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: f64,
    /// Integrate backward in time.
    #[arg(long)]
    pub backward: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub loop_args: LoopArgs,
    /// Size of the frequency step (rad/s).
    #[arg(long, allow_negative_numbers = true)]
    pub omega: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Trajectory CSV of the simulated step.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub loop_args: LoopArgs,
    /// Seed offset from the saddle; at most 1e-6.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Frequency deviation used for the filter-state column.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega_delta: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SignalLoopArgs {
    /// Reference frequency (rad/s).
    #[arg(long, allow_negative_numbers = true)]
    pub omega1: f64,
    /// VCO free-running frequency (rad/s); defaults to omega1.
    #[arg(long, allow_negative_numbers = true)]
    pub omega2_free: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kv: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub kd: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau2: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta1_0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta2_0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: f64,
}

#[derive(Debug, Args)]
pub struct SignalArgs {
    #[command(flatten)]
    pub signal: SignalLoopArgs,
    /// Base step; defaults to 1/200 of the reference period.
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub signal: SignalLoopArgs,
    /// Number of gap-curve samples.
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Gap-curve CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub loop_args: LoopArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega_delta: f64,
    #[command(flatten)]
    pub report: ReportArgs,
}
