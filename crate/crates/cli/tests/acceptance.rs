//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
//! here and never read from the environment.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pll_lockin::analytic::{lock_in_triangular, separatrix_slope_at_break};
use pll_lockin::model::{equiv_to_phase, pd_value, phase_to_equiv, rhs_phase};
use pll_lockin::numeric::{default_options, lock_in_numeric, simulate_lock_in};
use pll_lockin::signal::{compare_models, loop_time_constant, SignalParams};
use pll_lockin::{
    classify_stable, integrate, lock_in_analytic, Direction, EquivState, IntegratorOptions, LockCheck, LoopParameters,
    Method, PhaseState, StableKind, StopSpec, System, Termination, TRIANGULAR_SLOPE,
};
use pll_lockin_cli::{run_sweep, SweepSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AGREEMENT_TOL: f64 = 1e-4;
const GRID_RUNTIME: Duration = Duration::from_secs(60);
const BREAK_TOL: f64 = 1e-4;
const SPECIALIZATION_TOL: f64 = 1e-12;
const SPECIALIZATION_DRAWS: usize = 1000;
const BOUNDARY_OFFSET: f64 = 1e-6;
const BOUNDARY_TOL: f64 = 1e-3;
const LOCK_BELOW: f64 = 0.95;
const SLIP_ABOVE: f64 = 1.05;
const TRAJECTORY_TOL: f64 = 1e-7;
const SHIFT_ULPS: f64 = 8.0;
const PD_SAMPLES: usize = 10_000;
const PD_TOL: f64 = 1e-12;
const AVERAGING_GAP: f64 = 0.1;
const AVERAGING_SEPARATION: f64 = 100.0;
const AVERAGING_TIME_CONSTANTS: f64 = 10.0;
const SEED: u64 = 0x5eed_10c4;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

/// τ2 family and K0/τ1 axis of the diagram grid, degenerate gains included.
fn grid_spec(methods: Vec<Method>) -> SweepSpec {
    SweepSpec {
        x_values: SweepSpec::log_axis(0.1, 1e4, 12).expect("valid axis"),
        tau2_set: vec![0.2, 0.5, 1.0, 2.0],
        slope_k: TRIANGULAR_SLOPE,
        tau1: 1.0,
        methods,
        degenerate_points: true,
    }
}

fn grid_params() -> Vec<LoopParameters> {
    grid_spec(vec![Method::Analytic])
        .points()
        .into_iter()
        .map(|(tau2, x)| LoopParameters::triangular(1.0, tau2, x).expect("valid grid point"))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn analytic_numeric_agreement() -> Verdict {
    let spec = grid_spec(vec![Method::Analytic, Method::Numeric]);
    let start = Instant::now();
    let rows = run_sweep(&spec, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    let mut cases = std::collections::BTreeSet::new();
    for pair in rows.chunks(2) {
        let (a, n) = (&pair[0], &pair[1]);
        if let Some(e) = a.error.as_ref().or(n.error.as_ref()) {
            return Err(format!("K0/τ1 = {}, τ2 = {}: {e}", a.k0_over_tau1, a.tau2));
        }
        let (wa, wn) = (a.omega_l.unwrap(), n.omega_l.unwrap());
        worst = worst.max(rel(wn, wa));
        cases.insert(a.case.clone());
    }
    let points = rows.len() / 2;
    let detail = format!(
        "{points} points, cases {cases:?}, worst relative gap {worst:.2e} (tol {AGREEMENT_TOL:.0e}), {:.2} s",
        elapsed.as_secs_f64()
    );
    if points >= 50 && cases.len() == 3 && worst <= AGREEMENT_TOL && elapsed < GRID_RUNTIME {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn break_height() -> Verdict {
    let (mut worst, mut library): (f64, f64) = (0.0, 0.0);
    for p in grid_params() {
        let n = lock_in_numeric(&p, &default_options(&p)).map_err(|e| e.to_string())?;
        let traced = n.diagnostics["s_prime_at_break"];
        // closed form, written out independently of the library
        let (ak0, bk0, k) = (p.a_k0(), p.b_k0(), p.slope_k());
        let closed = ((ak0 * ak0 + 4.0 * bk0 * (PI - 1.0 / k)).sqrt() - ak0) / 2.0;
        worst = worst.max(rel(traced, closed));
        library = library.max(rel(separatrix_slope_at_break(&p), closed));
    }
    let detail = format!("traced worst relative gap {worst:.2e} (tol {BREAK_TOL:.0e}), library closed form {library:.1e}");
    if worst <= BREAK_TOL && library <= SPECIALIZATION_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn triangular_specialization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    for _ in 0..SPECIALIZATION_DRAWS {
        let tau1 = 10f64.powf(rng.gen_range(-1.0..1.0));
        let tau2 = 10f64.powf(rng.gen_range(-1.5..0.7));
        let k0 = 10f64.powf(rng.gen_range(-2.0..4.0));
        let p = LoopParameters::triangular(tau1, tau2, k0).map_err(|e| e.to_string())?;
        let general = lock_in_analytic(&p).map_err(|e| e.to_string())?;
        counts[match general.case_tag {
            StableKind::Node => 0,
            StableKind::DegenerateNode => 1,
            StableKind::Focus => 2,
        }] += 1;
        worst = worst.max(rel(lock_in_triangular(&p), general.omega_l));
    }
    let detail = format!(
        "{SPECIALIZATION_DRAWS} draws (node {}, focus {}), worst relative gap {worst:.2e} (tol {SPECIALIZATION_TOL:.0e})",
        counts[0], counts[2]
    );
    if worst <= SPECIALIZATION_TOL && counts[0] > 0 && counts[2] > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn case_boundary() -> Verdict {
    let expect = PI * SQRT_2 / 2.0 * (1.0 / SQRT_2).exp();
    let centre = LoopParameters::triangular(1.0, 1.0, TAU).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = classify_stable(&centre) == StableKind::DegenerateNode;
    for (sign, kind) in [(1.0, StableKind::Node), (-1.0, StableKind::Focus)] {
        // with τ1 = τ2 = 1, D/(aK0)² = δK0/K0 to first order
        let p = LoopParameters::triangular(1.0, 1.0, TAU * (1.0 + sign * BOUNDARY_OFFSET)).map_err(|e| e.to_string())?;
        let d = pll_lockin::equilibria::discriminant(&p) / p.a_k0().powi(2);
        let r = lock_in_analytic(&p).map_err(|e| e.to_string())?;
        let gap = rel(r.omega_l, expect);
        ok &= r.case_tag == kind && gap <= BOUNDARY_TOL && rel(d, sign * BOUNDARY_OFFSET) < 0.01;
        parts.push(format!("{kind} gap {gap:.2e}"));
    }
    let gap0 = rel(lock_in_analytic(&centre).map_err(|e| e.to_string())?.omega_l, expect);
    ok &= gap0 <= 1e-12;
    let detail = format!("{} (tol {BOUNDARY_TOL:.0e}); degenerate value {expect:.12}", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lock_bracket() -> Verdict {
    let mut failures = Vec::new();
    let mut count = 0;
    for p in grid_params() {
        let wl = lock_in_analytic(&p).map_err(|e| e.to_string())?.omega_l;
        let opts = default_options(&p);
        for (factor, want) in [(LOCK_BELOW, LockCheck::Locks), (SLIP_ABOVE, LockCheck::Slips)] {
            let (got, traj) = simulate_lock_in(&p, factor * wl, &opts).map_err(|e| e.to_string())?;
            count += 1;
            if got != want || traj.last().t > opts.max_time {
                failures.push(format!("K0 = {:.4e}, τ2 = {}, {factor}·ω_l: {got:?}", p.k0(), p.tau2()));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{count} simulations, all within the time budget"))
    } else {
        Err(failures.join("; "))
    }
}

fn checkpoints_along(system: System, start: [f64; 2], p: &LoopParameters, times: &[f64]) -> Result<Vec<[f64; 2]>, String> {
    let mut state = start;
    let mut t = 0.0;
    let mut out = Vec::new();
    for &tc in times {
        let opts = IntegratorOptions {
            max_time: tc - t,
            ..IntegratorOptions::default()
        };
        let traj = integrate(system, state, p, &opts, Direction::Forward, &StopSpec::none()).map_err(|e| e.to_string())?;
        if traj.termination != Termination::TimeLimit {
            return Err(format!("unexpected termination {:?}", traj.termination));
        }
        state = traj.last().state;
        t = tc;
        out.push(state);
    }
    Ok(out)
}

fn equivalence_and_symmetry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let times: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let (mut equiv_gap, mut mirror_gap, mut shift_ulps, mut pd_gap): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..25 {
        let p = LoopParameters::triangular(rng.gen_range(0.3..3.0), rng.gen_range(0.2..2.0), rng.gen_range(0.3..20.0))
            .and_then(|p| p.with_omega_delta(rng.gen_range(-3.0..3.0)))
            .map_err(|e| e.to_string())?;
        let (th, x) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let phase = checkpoints_along(System::Phase, [th, x], &p, &times)?;
        let y0 = phase_to_equiv(PhaseState::new(th, x), &p).y;
        let equiv = checkpoints_along(System::Equiv, [th, y0], &p, &times)?;
        for (u, v) in phase.iter().zip(&equiv) {
            let m = equiv_to_phase(EquivState::new(v[0], v[1]), &p);
            equiv_gap = equiv_gap.max((u[0] - m.theta_delta).abs() / (1.0 + u[0].abs()));
            equiv_gap = equiv_gap.max((u[1] - m.x).abs() / (1.0 + u[1].abs()));
        }
        let mirror = p.with_omega_delta(-p.omega_delta_free()).map_err(|e| e.to_string())?;
        let flipped = checkpoints_along(System::Phase, [-th, -x], &mirror, &times)?;
        for (u, v) in phase.iter().zip(&flipped) {
            mirror_gap = mirror_gap.max((u[0] + v[0]).abs() / (1.0 + u[0].abs()));
            mirror_gap = mirror_gap.max((u[1] + v[1]).abs() / (1.0 + u[1].abs()));
        }
    }
    for _ in 0..PD_SAMPLES {
        let p = LoopParameters::new(
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.05..5.0),
            rng.gen_range(0.05..100.0),
            rng.gen_range(1.0 / PI + 1e-3..5.0),
            rng.gen_range(-5.0..5.0),
        )
        .map_err(|e| e.to_string())?;
        let (th, x) = (rng.gen_range(-20.0..20.0), rng.gen_range(-5.0..5.0));
        let shifted = rhs_phase(PhaseState::new(th, x + p.x_eq()), &p);
        let base = rhs_phase(PhaseState::new(th, x), &p.with_omega_delta(0.0).map_err(|e| e.to_string())?);
        let scale = p.b_k0() * (x.abs() + p.x_eq().abs() + p.tau2()) + p.omega_delta_free().abs();
        shift_ulps = shift_ulps.max((shifted.0 - base.0).abs() / f64::EPSILON);
        shift_ulps = shift_ulps.max((shifted.1 - base.1).abs() / (f64::EPSILON * scale));
        let k = p.slope_k();
        pd_gap = pd_gap.max((pd_value(th + TAU, k) - pd_value(th, k)).abs());
        pd_gap = pd_gap.max((pd_value(-th, k) + pd_value(th, k)).abs());
    }
    let detail = format!(
        "equivalence {equiv_gap:.1e}, mirror {mirror_gap:.1e} (tol {TRAJECTORY_TOL:.0e}); shift {shift_ulps:.1} ulp (tol {SHIFT_ULPS}); pd periodicity/oddness {pd_gap:.1e} over {PD_SAMPLES} samples"
    );
    if equiv_gap <= TRAJECTORY_TOL && mirror_gap <= TRAJECTORY_TOL && shift_ulps <= SHIFT_ULPS && pd_gap <= PD_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn averaging() -> Verdict {
    let base = SignalParams {
        omega1: 500.0,
        omega2_free: 499.8,
        kv: 1.0,
        kd: 1.0,
        tau1: 1.0,
        tau2: 1.0,
        theta1_0: 0.1,
        theta2_0: 0.0,
        x0: 0.0,
    };
    let sets = [
        base,
        SignalParams { omega1: 400.0, omega2_free: 399.5, kv: 2.0, tau2: 0.5, ..base },
        SignalParams { omega1: 300.0, omega2_free: 300.3, kd: 2.0, tau1: 2.0, theta2_0: 0.4, x0: 0.1, ..base },
        SignalParams { omega1: 200.0, omega2_free: 199.9, kv: 0.5, tau1: 0.5, tau2: 2.0, ..base },
        SignalParams { omega1: 800.0, omega2_free: 799.0, kv: 4.0, tau2: 0.3, theta1_0: -0.5, ..base },
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for p in sets {
        let separation = p.omega1 / (p.k0() / p.tau1);
        let horizon = AVERAGING_TIME_CONSTANTS * loop_time_constant(&p).map_err(|e| e.to_string())?;
        let cmp = compare_models(&p, horizon).map_err(|e| e.to_string())?;
        let early = cmp.sup_between(0.0, horizon / 2.0);
        let late = cmp.sup_between(horizon / 2.0, horizon);
        ok &= separation >= AVERAGING_SEPARATION && cmp.sup_phase_gap <= AVERAGING_GAP && late <= early;
        parts.push(format!("{:.4}", cmp.sup_phase_gap));
    }
    let detail = format!("sup gaps [{}] rad (tol {AVERAGING_GAP}), late half never above early half", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_pll-lockin");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())
            .and_then(|o| if o.status.success() { Ok(o.stdout) } else { Err(String::from_utf8_lossy(&o.stderr).into_owned()) })
    };
    let sweep = ["sweep", "--x", "0.1:10000:12", "--tau2", "0.2,0.5,1,2", "--degenerate-points", "--deterministic"];
    let first = run(&sweep)?;
    let second = run(&sweep)?;
    let mut threaded = sweep.to_vec();
    threaded.extend(["--jobs", "4"]);
    let third = run(&threaded)?;
    let report = ["lockin", "--k0", "3", "--tau2", "0.5", "--json", "--deterministic"];
    let (r1, r2) = (run(&report)?, run(&report)?);
    let detail = format!("sweep {} bytes, report {} bytes", first.len(), r1.len());
    if first == second && first == third && r1 == r2 && !first.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("analytic-numeric agreement", analytic_numeric_agreement),
        ("separatrix height at the kink", break_height),
        ("triangular specialization", triangular_specialization),
        ("case-boundary continuity", case_boundary),
        ("lock/slip bracket", lock_bracket),
        ("model equivalence and symmetry", equivalence_and_symmetry),
        ("averaging validation", averaging),
        ("deterministic output", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
