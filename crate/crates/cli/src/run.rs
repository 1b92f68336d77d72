use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use pll_lockin::equilibria::{saddle_eigensystem, stable_eigensystem, Complex64, EigenSystem};
use pll_lockin::integrate::{Sample, SampleKind};
use pll_lockin::model::{equiv_to_phase, phase_to_equiv};
use pll_lockin::numeric::{
    default_options, default_seed_offset, detect_cycle_slip, simulate_lock_in, trace_separatrix, CycleSlip,
};
use pll_lockin::signal::{compare_models_sampled, loop_time_constant, simulate_signal_space, SignalParams, STEPS_PER_PERIOD};
use pll_lockin::{
    classify_stable, find_equilibria, integrate, lock_in_analytic, lock_in_numeric, Direction, EquivState, Error,
    IntegratorOptions, LockCheck, LockInResult, LoopParameters, Method, PhaseState, StopSpec, System, Termination,
};
use serde::Serialize;

use crate::args::*;
use crate::config::merge_config;
use crate::format::{num, to_json};
use crate::sweep::{run_sweep, write_csv, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::InvalidOptions(_) | Error::InvalidSweep(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Data goes to `out` unless redirected to a file;
/// diagnostics go to `err`.
pub fn run_command(argv: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Lockin(a) => lockin(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::CheckLockin(a) => check(a, out),
        Command::TraceSeparatrix(a) => trace(a, out),
        Command::SignalSim(a) => signal_sim(a, out, err),
        Command::CompareModels(a) => compare(a, out, err),
        Command::Equilibria(a) => equilibria(a, out),
    }
}

fn loop_params(a: &LoopArgs, omega_delta: f64) -> CliResult<LoopParameters> {
    Ok(LoopParameters::new(a.tau1, a.tau2, a.k0, a.slope_k, omega_delta)?)
}

fn solver_options(params: &LoopParameters, s: &SolverArgs) -> CliResult<IntegratorOptions> {
    let mut o = default_options(params);
    o.rel_tol = s.rel_tol.unwrap_or(o.rel_tol);
    o.abs_tol = s.abs_tol.unwrap_or(o.abs_tol);
    o.max_step = s.max_step.unwrap_or(o.max_step);
    o.max_time = s.max_time.unwrap_or(o.max_time);
    o.validate()?;
    Ok(o)
}

/// Runs `write` against `path`, or against `fallback` when no path is given.
fn with_output(
    path: Option<&Path>,
    fallback: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliResult {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            write(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => Ok(write(fallback)?),
    }
}

#[derive(Serialize)]
struct ParamsView {
    tau1: f64,
    tau2: f64,
    k0: f64,
    slope_k: f64,
    omega_delta_free: f64,
    a: f64,
    b: f64,
}

impl ParamsView {
    fn new(p: &LoopParameters) -> Self {
        ParamsView {
            tau1: p.tau1(),
            tau2: p.tau2(),
            k0: p.k0(),
            slope_k: p.slope_k(),
            omega_delta_free: p.omega_delta_free(),
            a: p.a(),
            b: p.b(),
        }
    }
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "pll-lockin")]
    core: &'static str,
    #[serde(rename = "pll-lockin-cli")]
    cli: &'static str,
}

const VERSIONS: Versions = Versions {
    core: pll_lockin::VERSION,
    cli: env!("CARGO_PKG_VERSION"),
};

fn timestamp(report: &ReportArgs) -> Option<u64> {
    if report.deterministic {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }
}

/// Common envelope of every JSON report.
#[derive(Serialize)]
struct Report<T: Serialize> {
    params: ParamsView,
    case: String,
    #[serde(flatten)]
    body: T,
    versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
}

fn report<T: Serialize>(p: &LoopParameters, body: T, r: &ReportArgs) -> Report<T> {
    Report {
        params: ParamsView::new(p),
        case: classify_stable(p).name().to_string(),
        body,
        versions: VERSIONS,
        timestamp: timestamp(r),
    }
}

#[derive(Serialize)]
struct MethodResult {
    method: Method,
    omega_l: f64,
    s_prime_zero: f64,
    diagnostics: BTreeMap<String, f64>,
}

impl From<LockInResult> for MethodResult {
    fn from(r: LockInResult) -> Self {
        MethodResult {
            method: r.method,
            omega_l: r.omega_l,
            s_prime_zero: r.s_prime_at_zero,
            diagnostics: r.diagnostics,
        }
    }
}

#[derive(Serialize)]
struct LockinBody {
    results: Vec<MethodResult>,
}

fn lockin(a: LockinArgs, out: &mut dyn Write) -> CliResult {
    let p = loop_params(&a.loop_args, 0.0)?;
    let opts = solver_options(&p, &a.solver)?;
    let mut results = Vec::new();
    if a.method != MethodChoice::Numeric {
        results.push(lock_in_analytic(&p)?);
    }
    if a.method != MethodChoice::Analytic {
        results.push(lock_in_numeric(&p, &opts)?);
    }
    if a.report.json {
        let body = LockinBody {
            results: results.into_iter().map(MethodResult::from).collect(),
        };
        out.write_all(to_json(&report(&p, body, &a.report))?.as_bytes())?;
        return Ok(());
    }
    writeln!(out, "case: {}", classify_stable(&p))?;
    for r in &results {
        write!(out, "{:<8} omega_l = {}", r.method.name(), num(r.omega_l))?;
        if let Some(e) = r.diagnostics.get("error_estimate") {
            write!(out, "  (error estimate {})", num(e / 2.0))?;
        }
        writeln!(out)?;
    }
    if let [x, y] = results.as_slice() {
        writeln!(out, "relative difference: {}", num((x.omega_l - y.omega_l).abs() / x.omega_l))?;
    }
    Ok(())
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("{what}: cannot parse {t:?}"))))
        .collect()
}

fn parse_axis(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, count] = parts.as_slice() else {
        return Err(CliError::Usage(format!("--x expects MIN:MAX:COUNT, got {s:?}")));
    };
    let min = min.parse::<f64>().map_err(|_| CliError::Usage(format!("--x: bad minimum {min:?}")))?;
    let max = max.parse::<f64>().map_err(|_| CliError::Usage(format!("--x: bad maximum {max:?}")))?;
    let count = count.parse::<usize>().map_err(|_| CliError::Usage(format!("--x: bad count {count:?}")))?;
    Ok(SweepSpec::log_axis(min, max, count)?)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> CliResult {
    let methods = match a.method {
        MethodChoice::Analytic => vec![Method::Analytic],
        MethodChoice::Numeric => vec![Method::Numeric],
        MethodChoice::Both => vec![Method::Analytic, Method::Numeric],
    };
    let spec = SweepSpec {
        x_values: parse_axis(&a.x)?,
        tau2_set: parse_list(&a.tau2, "--tau2")?,
        slope_k: a.slope_k,
        tau1: a.tau1,
        methods,
        degenerate_points: a.degenerate_points,
    };
    let rows = run_sweep(&spec, a.jobs)?;
    with_output(a.out.as_deref(), out, |w| write_csv(&rows, w))
}

fn kind_name(kind: SampleKind) -> &'static str {
    match kind {
        SampleKind::Initial => "initial",
        SampleKind::Step => "step",
        SampleKind::Kink => "kink",
        SampleKind::Event => "event",
    }
}

fn write_trajectory(w: &mut dyn Write, samples: &[Sample], phase: &[PhaseState], equiv: &[EquivState]) -> io::Result<()> {
    writeln!(w, "t,theta_delta,x,y,kind")?;
    for ((s, ps), es) in samples.iter().zip(phase).zip(equiv) {
        writeln!(
            w,
            "{},{},{},{},{}",
            num(s.t),
            num(ps.theta_delta),
            num(ps.x),
            num(es.y),
            kind_name(s.kind)
        )?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let p = loop_params(&a.loop_args, a.omega_delta)?;
    if !(a.t_end > 0.0 && a.t_end.is_finite()) {
        return Err(CliError::Usage(format!("--t-end must be positive, got {}", a.t_end)));
    }
    let mut opts = solver_options(&p, &a.solver)?;
    opts.max_time = a.t_end;
    let phase0 = match (a.x0, a.y0) {
        (_, Some(y)) => equiv_to_phase(EquivState::new(a.theta0, y), &p),
        (x, None) => PhaseState::new(a.theta0, x.unwrap_or(p.x_eq())),
    };
    let (system, state0) = match a.system {
        SystemChoice::Phase => (System::Phase, [phase0.theta_delta, phase0.x]),
        SystemChoice::Equiv => (System::Equiv, [phase0.theta_delta, phase_to_equiv(phase0, &p).y]),
    };
    let direction = if a.backward { Direction::Backward } else { Direction::Forward };
    let traj = integrate(system, state0, &p, &opts, direction, &StopSpec::none())?;
    let phase = traj.phase_states(&p);
    let equiv = traj.equiv_states(&p);
    with_output(a.out.as_deref(), out, |w| write_trajectory(w, &traj.samples, &phase, &equiv))
}

#[derive(Serialize)]
struct CheckBody {
    omega: f64,
    outcome: LockCheck,
    omega_l_analytic: f64,
    termination: Termination,
    t_final: f64,
    theta_final: f64,
    x_final: f64,
    max_excursion: Option<f64>,
}

fn check(a: CheckArgs, out: &mut dyn Write) -> CliResult {
    let p = loop_params(&a.loop_args, 0.0)?;
    let opts = solver_options(&p, &a.solver)?;
    let (outcome, traj) = simulate_lock_in(&p, a.omega, &opts)?;
    let stepped = p.with_omega_delta(a.omega)?;
    let last = *traj.last();
    let body = CheckBody {
        omega: a.omega,
        outcome,
        omega_l_analytic: lock_in_analytic(&p)?.omega_l,
        termination: traj.termination,
        t_final: last.t,
        theta_final: last.state[0],
        x_final: last.state[1],
        max_excursion: match detect_cycle_slip(&traj) {
            CycleSlip::Slipped => None,
            CycleSlip::NotSlipped { max_excursion } => Some(max_excursion),
        },
    };
    if let Some(path) = a.out.as_deref() {
        let phase = traj.phase_states(&stepped);
        let equiv = traj.equiv_states(&stepped);
        with_output(Some(path), out, |w| write_trajectory(w, &traj.samples, &phase, &equiv))?;
    }
    if a.report.json {
        out.write_all(to_json(&report(&p, &body, &a.report))?.as_bytes())?;
    } else {
        writeln!(out, "{:?}", outcome)?;
        writeln!(out, "omega = {}  omega_l = {}", num(a.omega), num(body.omega_l_analytic))?;
        writeln!(out, "t_final = {}  theta_final = {}", num(body.t_final), num(body.theta_final))?;
    }
    if outcome == LockCheck::Undetermined {
        return Err(CliError::Numeric(format!(
            "no verdict within max_time = {}",
            num(opts.max_time)
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TraceBody {
    epsilon: f64,
    y_at_break: f64,
    y_at_zero: f64,
    y_at_zero_raw: Vec<f64>,
    error_estimate: f64,
    omega_l: f64,
}

fn trace(a: TraceArgs, out: &mut dyn Write) -> CliResult {
    let p = loop_params(&a.loop_args, a.omega_delta)?;
    let opts = solver_options(&p, &a.solver)?;
    let epsilon = a.epsilon.unwrap_or_else(|| default_seed_offset(&p));
    let t = trace_separatrix(&p, epsilon, &opts)?;
    let body = TraceBody {
        epsilon: t.epsilon,
        y_at_break: t.y_at_break,
        y_at_zero: t.y_at_zero,
        y_at_zero_raw: t.y_at_zero_raw.clone(),
        error_estimate: t.error_estimate,
        omega_l: t.y_at_zero / 2.0,
    };
    let write_curve = |w: &mut dyn Write| {
        let phase = t.trajectory.phase_states(&p);
        let equiv = t.trajectory.equiv_states(&p);
        write_trajectory(w, &t.trajectory.samples, &phase, &equiv)
    };
    if a.out.is_some() || !a.report.json {
        with_output(a.out.as_deref(), out, write_curve)?;
    }
    if a.report.json {
        out.write_all(to_json(&report(&p, &body, &a.report))?.as_bytes())?;
    } else if a.out.is_some() {
        writeln!(out, "y(1/k) = {}", num(body.y_at_break))?;
        writeln!(out, "y(0)   = {}  (error estimate {})", num(body.y_at_zero), num(body.error_estimate))?;
        writeln!(out, "omega_l = {}", num(body.omega_l))?;
    }
    Ok(())
}

fn signal_params(a: &SignalLoopArgs) -> CliResult<SignalParams> {
    let p = SignalParams {
        omega1: a.omega1,
        omega2_free: a.omega2_free.unwrap_or(a.omega1),
        kv: a.kv,
        kd: a.kd,
        tau1: a.tau1,
        tau2: a.tau2,
        theta1_0: a.theta1_0,
        theta2_0: a.theta2_0,
        x0: a.x0,
    };
    p.validate()?;
    if !(a.t_end > 0.0 && a.t_end.is_finite()) {
        return Err(CliError::Usage(format!("--t-end must be positive, got {}", a.t_end)));
    }
    Ok(p)
}

fn warn_scale_separation(p: &SignalParams, err: &mut dyn Write) -> io::Result<()> {
    if p.omega1 < 100.0 * p.k0() / p.tau1 {
        writeln!(err, "warning: omega1 < 100 K0/tau1; the averaged model is not expected to hold")?;
    }
    Ok(())
}

fn signal_sim(a: SignalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let p = signal_params(&a.signal)?;
    warn_scale_separation(&p, err)?;
    let dt = a.dt.unwrap_or(std::f64::consts::TAU / (STEPS_PER_PERIOD * p.omega1));
    let traj = simulate_signal_space(&p, a.signal.t_end, dt)?;
    with_output(a.out.as_deref(), out, |w| {
        writeln!(w, "t,theta1,theta2,theta_delta,x,phi,switching")?;
        for s in &traj.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                num(s.t),
                num(s.state.theta1),
                num(s.state.theta2),
                num(s.state.phase_error()),
                num(s.state.x),
                s.phi,
                u8::from(s.switching)
            )?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct CompareBody {
    signal: SignalParams,
    horizon: f64,
    loop_time_constant: f64,
    sup_phase_gap: f64,
    advisory: bool,
}

fn compare(a: CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let p = signal_params(&a.signal)?;
    warn_scale_separation(&p, err)?;
    let cmp = compare_models_sampled(&p, a.signal.t_end, a.points)?;
    let body = CompareBody {
        signal: p,
        horizon: a.signal.t_end,
        loop_time_constant: loop_time_constant(&p)?,
        sup_phase_gap: cmp.sup_phase_gap,
        advisory: cmp.advisory,
    };
    let write_curve = |w: &mut dyn Write| {
        writeln!(w, "t,gap")?;
        for (t, g) in &cmp.gap_curve {
            writeln!(w, "{},{}", num(*t), num(*g))?;
        }
        Ok(())
    };
    if a.out.is_some() || !a.report.json {
        with_output(a.out.as_deref(), out, write_curve)?;
    }
    if a.report.json {
        let model = p.phase_model()?;
        out.write_all(to_json(&report(&model, &body, &a.report))?.as_bytes())?;
    } else if a.out.is_some() {
        writeln!(out, "sup phase gap = {}", num(body.sup_phase_gap))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EigenView {
    lambda: [[f64; 2]; 2],
    vectors: [[[f64; 2]; 2]; 2],
    residuals: [f64; 2],
}

impl EigenView {
    fn new(e: &EigenSystem) -> Self {
        let c = |v: [Complex64; 2]| [[v[0].re, v[0].im], [v[1].re, v[1].im]];
        EigenView {
            lambda: [[e.lambda1.re, e.lambda1.im], [e.lambda2.re, e.lambda2.im]],
            vectors: [c(e.v1), c(e.v2)],
            residuals: [e.residual(1), e.residual(2)],
        }
    }
}

#[derive(Serialize)]
struct EquilibriumView {
    theta_eq: f64,
    x_eq: f64,
    y_eq: f64,
    kind: pll_lockin::EquilibriumKind,
    eigen: EigenView,
}

#[derive(Serialize)]
struct EquilibriaBody {
    discriminant: f64,
    equilibria: Vec<EquilibriumView>,
}

fn equilibria(a: EquilibriaArgs, out: &mut dyn Write) -> CliResult {
    let p = loop_params(&a.loop_args, a.omega_delta)?;
    let [stable, saddle] = find_equilibria(&p);
    let views: Vec<EquilibriumView> = [(stable, stable_eigensystem(&p)), (saddle, saddle_eigensystem(&p))]
        .iter()
        .map(|(e, eig)| EquilibriumView {
            theta_eq: e.theta_eq,
            x_eq: e.x_eq,
            y_eq: e.y_eq,
            kind: e.kind,
            eigen: EigenView::new(eig),
        })
        .collect();
    let body = EquilibriaBody {
        discriminant: pll_lockin::equilibria::discriminant(&p),
        equilibria: views,
    };
    if a.report.json {
        out.write_all(to_json(&report(&p, &body, &a.report))?.as_bytes())?;
        return Ok(());
    }
    writeln!(out, "discriminant = {}", num(body.discriminant))?;
    for v in &body.equilibria {
        writeln!(
            out,
            "{:?} at theta = {}, x = {}: lambda = {} {:+}i, {} {:+}i",
            v.kind,
            num(v.theta_eq),
            num(v.x_eq),
            num(v.eigen.lambda[0][0]),
            v.eigen.lambda[0][1],
            num(v.eigen.lambda[1][0]),
            v.eigen.lambda[1][1],
        )?;
    }
    Ok(())
}
