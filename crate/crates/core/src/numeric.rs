//! Numerical lock-in frequency and lock-in verification by simulation.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::analytic::{LockInResult, Method};
use crate::equilibria::{classify_stable, saddle_eigensystem, slowest_stable_rate};
use crate::error::{Error, Result};
use crate::integrate::{
    integrate, Convergence, Direction, IntegratorOptions, SampleKind, StopSpec, System, Termination,
    Trajectory,
};
use crate::model::LoopParameters;

/// Multiple of the slowest stable time constant used as the default horizon.
pub const HORIZON_TIME_CONSTANTS: f64 = 1e3;

/// Convergence band for the lock test: wrapped phase (rad).
pub const LOCK_THETA_TOL: f64 = 1e-6;
/// Convergence band for the lock test: `|y|` in units of `K0/τ1`.
pub const LOCK_RATE_TOL: f64 = 1e-6;
/// Consecutive accepted steps the state must stay inside the band.
pub const LOCK_DWELL_STEPS: usize = 10;

/// Largest admissible seed offset for separatrix tracing.
pub const MAX_SEED_OFFSET: f64 = 1e-6;

/// Integrator options with the horizon scaled to the loop's slowest mode.
pub fn default_options(params: &LoopParameters) -> IntegratorOptions {
    IntegratorOptions {
        max_time: HORIZON_TIME_CONSTANTS / slowest_stable_rate(params),
        ..IntegratorOptions::default()
    }
}

/// Default distance of the tracing seed from the saddle.
pub fn default_seed_offset(params: &LoopParameters) -> f64 {
    let scale = params.a_k0() * params.slope_k();
    (1e-8 * scale.max(1.0)).min(MAX_SEED_OFFSET)
}

/// The upper separatrix of the equivalent model traced back from the saddle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatrixTrace {
    /// Trajectory for the smallest seed offset used.
    pub trajectory: Trajectory,
    pub epsilon: f64,
    /// Height at the kink `θ = 1/k`.
    pub y_at_break: f64,
    /// Extrapolated height at `θ = 0`.
    pub y_at_zero: f64,
    /// Unextrapolated heights at `θ = 0`, one per seed offset.
    pub y_at_zero_raw: Vec<f64>,
    pub error_estimate: f64,
}

fn trace_once(params: &LoopParameters, epsilon: f64, opts: &IntegratorOptions) -> Result<(Trajectory, f64, f64)> {
    let eig = saddle_eigensystem(params);
    let v = [eig.v2[0].re, eig.v2[1].re];
    let norm = v[0].hypot(v[1]);
    // oriented so that the seed lies in the upper half plane
    let sign = if v[1] >= 0.0 { 1.0 } else { -1.0 };
    let seed = [PI + epsilon * sign * v[0] / norm, epsilon * sign * v[1] / norm];
    let traj = integrate(
        System::Equiv,
        seed,
        params,
        opts,
        Direction::Backward,
        &StopSpec::at_levels(vec![0.0]),
    )?;
    if traj.termination != Termination::EventHit {
        return Err(Error::NoCrossing {
            target: 0.0,
            max_time: opts.max_time,
        });
    }
    let kink = 1.0 / params.slope_k();
    let y_break = traj
        .samples
        .iter()
        .find(|s| s.kind == SampleKind::Kink && (s.theta() - kink).abs() <= opts.event_tol)
        .map(|s| s.state[1])
        .ok_or(Error::NoCrossing {
            target: kink,
            max_time: opts.max_time,
        })?;
    let y_zero = traj.last().state[1];
    Ok((traj, y_break, y_zero))
}

/// Traces the separatrix with `levels + 1` seed offsets `ε, ε/10, …` and
/// Richardson-extrapolates the height at `θ = 0` assuming an error linear in ε.
pub fn trace_separatrix_refined(
    params: &LoopParameters,
    epsilon: f64,
    levels: usize,
    opts: &IntegratorOptions,
) -> Result<SeparatrixTrace> {
    if !(epsilon > 0.0 && epsilon <= MAX_SEED_OFFSET) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
        });
    }
    let mut raw = Vec::with_capacity(levels + 1);
    let mut last = None;
    let mut eps = epsilon;
    for _ in 0..=levels {
        let (traj, y_break, y_zero) = trace_once(params, eps, opts)?;
        raw.push(y_zero);
        last = Some((traj, y_break, eps));
        eps /= 10.0;
    }
    let (trajectory, y_at_break, eps_final) = last.expect("at least one trace");

    // Neville-style table for the ratio-10 sequence
    let mut table = raw.clone();
    for level in 1..table.len() {
        let factor = 10f64.powi(level as i32);
        for i in (level..table.len()).rev() {
            table[i] += (table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    let y_at_zero = *table.last().expect("non-empty");
    let correction = y_at_zero - raw[raw.len() - 1];
    let floor = 100.0 * opts.rel_tol * y_at_zero.abs() + 100.0 * opts.abs_tol;
    Ok(SeparatrixTrace {
        trajectory,
        epsilon: eps_final,
        y_at_break,
        y_at_zero,
        y_at_zero_raw: raw,
        error_estimate: correction.abs().max(floor),
    })
}

/// Separatrix trace with one Richardson level over `{ε, ε/10}`.
pub fn trace_separatrix(params: &LoopParameters, epsilon: f64, opts: &IntegratorOptions) -> Result<SeparatrixTrace> {
    trace_separatrix_refined(params, epsilon, 1, opts)
}

pub fn lock_in_numeric(params: &LoopParameters, opts: &IntegratorOptions) -> Result<LockInResult> {
    let epsilon = default_seed_offset(params);
    let trace = trace_separatrix(params, epsilon, opts)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("epsilon".into(), epsilon);
    diagnostics.insert("rel_tol".into(), opts.rel_tol);
    diagnostics.insert("abs_tol".into(), opts.abs_tol);
    diagnostics.insert("error_estimate".into(), trace.error_estimate);
    diagnostics.insert("s_prime_at_break".into(), trace.y_at_break);
    diagnostics.insert("steps".into(), trace.trajectory.accepted_steps as f64);
    Ok(LockInResult {
        omega_l: trace.y_at_zero / 2.0,
        case_tag: classify_stable(params),
        method: Method::Numeric,
        s_prime_at_zero: trace.y_at_zero,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CycleSlip {
    Slipped,
    NotSlipped { max_excursion: f64 },
}

/// Cycle slip iff `sup |θ(0) − θ(t)| ≥ 2π` over the samples.
pub fn detect_cycle_slip(traj: &Trajectory) -> CycleSlip {
    let theta0 = traj.samples[0].theta();
    let sup = traj.thetas().map(|th| (theta0 - th).abs()).fold(0.0, f64::max);
    if sup >= TAU {
        CycleSlip::Slipped
    } else {
        CycleSlip::NotSlipped { max_excursion: sup }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockCheck {
    Locks,
    Slips,
    Undetermined,
}

/// Frequency-step scenario: the loop sits in its locked state for deviation
/// `−ω` when the deviation jumps to `+ω`. Starting at `(0, x_eq(−ω))` the
/// loop must settle in `(0, x_eq(ω))` without slipping a cycle.
pub fn check_lock_in(params_base: &LoopParameters, omega: f64, opts: &IntegratorOptions) -> Result<LockCheck> {
    Ok(simulate_lock_in(params_base, omega, opts)?.0)
}

/// Like [`check_lock_in`], also returning the simulated trajectory.
pub fn simulate_lock_in(
    params_base: &LoopParameters,
    omega: f64,
    opts: &IntegratorOptions,
) -> Result<(LockCheck, Trajectory)> {
    if omega.is_nan() || omega < 0.0 {
        return Err(Error::InvalidParameter {
            name: "omega",
            value: omega,
        });
    }
    let params = params_base.with_omega_delta(omega)?;
    let x0 = params.x_eq_for(-omega);
    let stop = StopSpec {
        theta_levels: vec![-TAU, TAU],
        convergence: Some(Convergence {
            theta_tol: LOCK_THETA_TOL,
            y_tol: LOCK_RATE_TOL * params.b_k0(),
            dwell_steps: LOCK_DWELL_STEPS,
        }),
    };
    let traj = integrate(System::Phase, [0.0, x0], &params, opts, Direction::Forward, &stop)?;
    let outcome = match (detect_cycle_slip(&traj), traj.termination) {
        (CycleSlip::Slipped, _) => LockCheck::Slips,
        (_, Termination::Converged) => {
            // settled on a stable point other than the starting one
            if (traj.last().theta() / TAU).round() != 0.0 {
                LockCheck::Slips
            } else {
                LockCheck::Locks
            }
        }
        _ => LockCheck::Undetermined,
    };
    Ok((outcome, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{lock_in_analytic, separatrix_slope_at_break};
    use crate::integrate::{Sample, Termination};
    use approx::assert_relative_eq;

    fn tri(k0: f64) -> LoopParameters {
        LoopParameters::triangular(1.0, 1.0, k0).unwrap()
    }

    fn synthetic(thetas: &[f64]) -> Trajectory {
        Trajectory {
            system: System::Phase,
            samples: thetas
                .iter()
                .enumerate()
                .map(|(i, &th)| Sample {
                    t: i as f64,
                    state: [th, 0.0],
                    kind: SampleKind::Step,
                })
                .collect(),
            termination: Termination::TimeLimit,
            accepted_steps: thetas.len(),
            rejected_steps: 0,
        }
    }

    #[test]
    fn cycle_slip_threshold() {
        assert_eq!(
            detect_cycle_slip(&synthetic(&[0.3, 0.3, 0.3])),
            CycleSlip::NotSlipped { max_excursion: 0.0 }
        );
        let ramp: Vec<f64> = (0..=100).map(|i| TAU * i as f64 / 100.0).collect();
        assert_eq!(detect_cycle_slip(&synthetic(&ramp)), CycleSlip::Slipped);
        let osc: Vec<f64> = (0..200).map(|i| 1.9 * PI * (i as f64 * 0.1).sin()).collect();
        match detect_cycle_slip(&synthetic(&osc)) {
            CycleSlip::NotSlipped { max_excursion } => {
                assert!(max_excursion <= 1.9 * PI && max_excursion > 1.85 * PI)
            }
            CycleSlip::Slipped => panic!("below threshold"),
        }
    }

    #[test]
    fn trace_matches_closed_forms() {
        for k0 in [1.0, 2.0 * PI, 10.0] {
            let p = tri(k0);
            let opts = default_options(&p);
            let trace = trace_separatrix(&p, default_seed_offset(&p), &opts).unwrap();
            assert_relative_eq!(trace.y_at_break, separatrix_slope_at_break(&p), max_relative = 1e-4);
            let analytic = lock_in_analytic(&p).unwrap();
            assert_relative_eq!(trace.y_at_zero, 2.0 * analytic.omega_l, max_relative = 1e-4);
        }
    }

    #[test]
    fn trace_is_monotone_and_positive() {
        let p = tri(1.0);
        let trace = trace_separatrix(&p, 1e-7, &default_options(&p)).unwrap();
        for w in trace.trajectory.samples.windows(2) {
            assert!(w[1].theta() < w[0].theta());
        }
        for s in &trace.trajectory.samples {
            if s.theta() > 0.0 && s.theta() < PI {
                assert!(s.state[1] > 0.0);
            }
        }
    }

    #[test]
    fn refinement_within_error_estimate() {
        let p = tri(1.0);
        let opts = default_options(&p);
        let a = trace_separatrix(&p, 1e-6, &opts).unwrap();
        let b = trace_separatrix(&p, 5e-7, &opts).unwrap();
        assert!((a.y_at_zero - b.y_at_zero).abs() < a.error_estimate);
    }

    #[test]
    fn rejects_large_seed() {
        let p = tri(1.0);
        assert!(trace_separatrix(&p, 1e-3, &default_options(&p)).is_err());
    }

    #[test]
    fn general_slope_agrees() {
        let p = LoopParameters::new(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let numeric = lock_in_numeric(&p, &default_options(&p)).unwrap();
        let analytic = lock_in_analytic(&p).unwrap();
        assert_relative_eq!(numeric.omega_l, analytic.omega_l, max_relative = 1e-4);
    }

    #[test]
    fn tolerance_convergence() {
        let p = tri(10.0);
        let opts = default_options(&p);
        let tight = IntegratorOptions {
            rel_tol: opts.rel_tol / 10.0,
            abs_tol: opts.abs_tol / 10.0,
            ..opts
        };
        let a = lock_in_numeric(&p, &opts).unwrap().omega_l;
        let b = lock_in_numeric(&p, &tight).unwrap().omega_l;
        assert_relative_eq!(a, b, max_relative = 1e-6);
    }

    #[test]
    fn zero_step_locks() {
        let p = tri(1.0);
        assert_eq!(check_lock_in(&p, 0.0, &default_options(&p)).unwrap(), LockCheck::Locks);
    }

    #[test]
    fn brackets_lock_in_frequency() {
        for k0 in [1.0, 2.0 * PI, 10.0] {
            let p = tri(k0);
            let opts = default_options(&p);
            let wl = lock_in_analytic(&p).unwrap().omega_l;
            assert_eq!(check_lock_in(&p, 0.95 * wl, &opts).unwrap(), LockCheck::Locks, "K0 = {k0}");
            assert_eq!(check_lock_in(&p, 1.05 * wl, &opts).unwrap(), LockCheck::Slips, "K0 = {k0}");
        }
    }
}
