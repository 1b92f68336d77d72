//! Event-aware adaptive integration of the phase and equivalent models.
//!
//! Steps are taken with the Dormand–Prince 5(4) pair. The vector field is
//! evaluated through a single affine segment of the characteristic for a whole
//! step; when a step would carry the phase across a kink the step length is
//! bisected until the end point lies on the kink, a sample is inserted there
//! and integration continues on the next segment. User θ-levels are located
//! the same way and stop the integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EquivState, LoopParameters, PdSegment, PhaseState};

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum System {
    /// `(θ, x)` phase model.
    Phase,
    /// `(θ, y)` equivalent model.
    Equiv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    /// Upper bound on `|t − t0|`.
    pub max_time: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            event_tol: 1e-12,
            max_time: 1e4,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
            ("max_time", self.max_time),
        ];
        for (name, v) in fields {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.max_time.is_finite() {
            return Err(Error::InvalidOptions("max_time must be finite".into()));
        }
        Ok(())
    }
}

/// Convergence to a stable point `(2πj, 0)` in equivalent coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub theta_tol: f64,
    pub y_tol: f64,
    /// Number of consecutive accepted steps the state must stay inside.
    pub dwell_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopSpec {
    /// Unwrapped θ-levels; the first one crossed ends the integration.
    pub theta_levels: Vec<f64>,
    pub convergence: Option<Convergence>,
}

impl StopSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn at_levels(levels: impl Into<Vec<f64>>) -> Self {
        Self {
            theta_levels: levels.into(),
            convergence: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    EventHit,
    TimeLimit,
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    Initial,
    Step,
    /// End point of a step that was shortened onto a kink.
    Kink,
    /// End point on a user stop level.
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// `[θ, x]` or `[θ, y]` depending on the system.
    pub state: [f64; 2],
    pub kind: SampleKind,
}

impl Sample {
    pub fn theta(&self) -> f64 {
        self.state[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: System,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.state[0])
    }

    /// Samples expressed in equivalent coordinates.
    pub fn equiv_states(&self, params: &LoopParameters) -> Vec<EquivState> {
        self.samples
            .iter()
            .map(|s| to_equiv(self.system, s.state, params))
            .collect()
    }

    /// Samples expressed in phase-model coordinates.
    pub fn phase_states(&self, params: &LoopParameters) -> Vec<PhaseState> {
        self.samples
            .iter()
            .map(|s| match self.system {
                System::Phase => PhaseState::new(s.state[0], s.state[1]),
                System::Equiv => crate::model::equiv_to_phase(EquivState::new(s.state[0], s.state[1]), params),
            })
            .collect()
    }
}

fn to_equiv(system: System, state: [f64; 2], params: &LoopParameters) -> EquivState {
    match system {
        System::Equiv => EquivState::new(state[0], state[1]),
        System::Phase => crate::model::phase_to_equiv(PhaseState::new(state[0], state[1]), params),
    }
}

fn field(system: System, params: &LoopParameters, seg: &PdSegment, u: [f64; 2]) -> [f64; 2] {
    let phi = seg.value(u[0]);
    match system {
        System::Phase => {
            let (dx, dtheta) = crate::model::phase_field(PhaseState::new(u[0], u[1]), params, phi);
            [dtheta, dx]
        }
        System::Equiv => {
            let (dtheta, dy) = crate::model::equiv_field(EquivState::new(u[0], u[1]), params, phi, seg.slope);
            [dtheta, dy]
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy(u: [f64; 2], terms: &[(f64, [f64; 2])], h: f64) -> [f64; 2] {
    let mut out = u;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

struct Stepper<'a> {
    system: System,
    params: &'a LoopParameters,
    opts: &'a IntegratorOptions,
    evals: usize,
}

impl Stepper<'_> {
    fn f(&mut self, seg: &PdSegment, u: [f64; 2]) -> [f64; 2] {
        self.evals += 1;
        field(self.system, self.params, seg, u)
    }

    /// One DP5(4) step of signed length `h`; returns the new state and the
    /// scaled error norm.
    fn step(&mut self, seg: &PdSegment, u: [f64; 2], k1: [f64; 2], h: f64) -> ([f64; 2], f64) {
        let k2 = self.f(seg, axpy(u, &[(A21, k1)], h));
        let k3 = self.f(seg, axpy(u, &[(A31, k1), (A32, k2)], h));
        let k4 = self.f(seg, axpy(u, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = self.f(seg, axpy(u, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
        let k6 = self.f(
            seg,
            axpy(u, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h),
        );
        let next = axpy(u, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
        let k7 = self.f(seg, next);
        let err = axpy(
            [0.0, 0.0],
            &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
            h,
        );
        let mut acc = 0.0;
        for i in 0..2 {
            let scale = self.opts.abs_tol + self.opts.rel_tol * u[i].abs().max(next[i].abs());
            acc += (err[i] / scale).powi(2);
        }
        (next, (acc / 2.0).sqrt())
    }
}

fn initial_step(u: [f64; 2], f0: [f64; 2], opts: &IntegratorOptions) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..2 {
        let scale = opts.abs_tol + opts.rel_tol * u[i].abs();
        d0 += (u[i] / scale).powi(2);
        d1 += (f0[i] / scale).powi(2);
    }
    let (d0, d1) = ((d0 / 2.0).sqrt(), (d1 / 2.0).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(opts.max_step).min(opts.max_time)
}

/// Sign of the phase velocity along the direction of travel, falling back to
/// the second derivative when the velocity vanishes.
fn heading(system: System, params: &LoopParameters, u: [f64; 2], dir: f64) -> f64 {
    let seg = PdSegment::locate(u[0], params.slope_k(), 0.0);
    let v = field(system, params, &seg, u)[0];
    if v != 0.0 {
        return dir * v;
    }
    -params.b_k0() * seg.value(u[0])
}

fn near_stable_point(system: System, params: &LoopParameters, u: [f64; 2], conv: &Convergence) -> bool {
    let theta_off = u[0] - TAU * (u[0] / TAU).round();
    if theta_off.abs() >= conv.theta_tol {
        return false;
    }
    let y = to_equiv(system, u, params).y;
    y.abs() < conv.y_tol
}

/// Integrates `system` from `state0` (given as `[θ, x]` or `[θ, y]`) at
/// `t = 0` until a stop level is crossed, the convergence predicate holds or
/// `max_time` elapses.
pub fn integrate(
    system: System,
    state0: [f64; 2],
    params: &LoopParameters,
    opts: &IntegratorOptions,
    direction: Direction,
    stop: &StopSpec,
) -> Result<Trajectory> {
    opts.validate()?;
    if !(state0[0].is_finite() && state0[1].is_finite()) {
        return Err(Error::InvalidParameter {
            name: "state0",
            value: if state0[0].is_finite() { state0[1] } else { state0[0] },
        });
    }
    let k = params.slope_k();
    let dir = direction.sign();
    let mut stepper = Stepper {
        system,
        params,
        opts,
        evals: 0,
    };

    let mut t = 0.0_f64;
    let mut u = state0;
    let mut seg = PdSegment::locate(u[0], k, heading(system, params, u, dir));
    let mut samples = vec![Sample {
        t,
        state: u,
        kind: SampleKind::Initial,
    }];
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut dwell = 0usize;

    if let Some(conv) = &stop.convergence {
        if near_stable_point(system, params, u, conv) && conv.dwell_steps == 0 {
            return Ok(Trajectory {
                system,
                samples,
                termination: Termination::Converged,
                accepted_steps: 0,
                rejected_steps: 0,
            });
        }
    }

    let mut k1 = stepper.f(&seg, u);
    let mut h = initial_step(u, k1, opts);

    loop {
        let elapsed = t.abs();
        if elapsed >= opts.max_time {
            return Ok(Trajectory {
                system,
                samples,
                termination: Termination::TimeLimit,
                accepted_steps: accepted,
                rejected_steps: rejected,
            });
        }
        h = h.min(opts.max_step).min(opts.max_time - elapsed);
        let h_floor = 1e-15 * (1.0 + elapsed);
        if h < h_floor {
            return Err(Error::StepUnderflow { t, h });
        }

        let (next, err) = stepper.step(&seg, u, k1, dir * h);
        if err.is_nan() || err > 1.0 {
            rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            h *= factor;
            continue;
        }
        let grow = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };

        // Surfaces crossed by this step: the segment's kinks and stop levels.
        let (lo, hi) = seg.bounds(k);
        let theta0 = u[0];
        let theta1 = next[0];
        let mut hit: Option<(f64, bool)> = None;
        let mut consider = |level: f64, is_stop: bool| {
            if (theta0 - level).abs() <= opts.event_tol {
                return;
            }
            let crossed = (theta0 - level).signum() != (theta1 - level).signum() || theta1 == level;
            if !crossed {
                return;
            }
            let better = match hit {
                None => true,
                Some((cur, cur_stop)) => {
                    let d_new = (level - theta0).abs();
                    let d_cur = (cur - theta0).abs();
                    d_new < d_cur || (d_new == d_cur && is_stop && !cur_stop)
                }
            };
            if better {
                hit = Some((level, is_stop));
            }
        };
        consider(lo, false);
        consider(hi, false);
        for &level in &stop.theta_levels {
            consider(level, true);
        }

        let (t_new, u_new, kind) = match hit {
            None => (t + dir * h, next, SampleKind::Step),
            Some((level, is_stop)) => {
                // bisect the step length so that the end point lands on `level`
                let side0 = (theta0 - level).signum();
                let (mut h_lo, mut h_hi) = (0.0, h);
                let mut best = (h, next);
                for _ in 0..200 {
                    let hm = 0.5 * (h_lo + h_hi);
                    let (um, _) = stepper.step(&seg, u, k1, dir * hm);
                    let g = um[0] - level;
                    best = (hm, um);
                    if g.abs() <= opts.event_tol || h_hi - h_lo <= f64::EPSILON * h {
                        break;
                    }
                    if g.signum() == side0 {
                        h_lo = hm;
                    } else {
                        h_hi = hm;
                    }
                }
                let (hm, mut um) = best;
                um[0] = level;
                let kind = if is_stop { SampleKind::Event } else { SampleKind::Kink };
                (t + dir * hm, um, kind)
            }
        };

        t = t_new;
        u = u_new;
        accepted += 1;
        samples.push(Sample { t, state: u, kind });

        if kind == SampleKind::Event {
            return Ok(Trajectory {
                system,
                samples,
                termination: Termination::EventHit,
                accepted_steps: accepted,
                rejected_steps: rejected,
            });
        }
        if kind == SampleKind::Kink {
            seg = PdSegment::locate(u[0], k, heading(system, params, u, dir));
        }
        if let Some(conv) = &stop.convergence {
            if near_stable_point(system, params, u, conv) {
                dwell += 1;
                if dwell >= conv.dwell_steps {
                    return Ok(Trajectory {
                        system,
                        samples,
                        termination: Termination::Converged,
                        accepted_steps: accepted,
                        rejected_steps: rejected,
                    });
                }
            } else {
                dwell = 0;
            }
        }
        k1 = stepper.f(&seg, u);
        if kind == SampleKind::Step {
            h *= grow;
        }
    }
}
