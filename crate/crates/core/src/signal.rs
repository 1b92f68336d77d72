//! Waveform-level loop: square-wave reference and VCO, sign multiplier and
//! PI filter.
//!
//! Between switching instants the multiplier output is constant, so the
//! filter state is linear and the VCO phase quadratic in time. The simulator
//! splits every base step at the switching instants and advances each piece
//! in closed form.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::equilibria::slowest_stable_rate;
use crate::error::{Error, Result};
use crate::integrate::{integrate, Direction, IntegratorOptions, StopSpec, System};
use crate::model::{LoopParameters, TRIANGULAR_SLOPE};

/// Default bound on the phase gap between the two models (rad).
pub const DEFAULT_GAP_TOLERANCE: f64 = 0.1;

/// Base steps per reference period.
pub const STEPS_PER_PERIOD: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    pub omega1: f64,
    pub omega2_free: f64,
    pub kv: f64,
    pub kd: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub theta1_0: f64,
    pub theta2_0: f64,
    pub x0: f64,
}

impl SignalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega1", self.omega1),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("kd", self.kd),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !(self.kv >= 0.0 && self.kv.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "kv",
                value: self.kv,
            });
        }
        for (name, value) in [
            ("omega2_free", self.omega2_free),
            ("theta1_0", self.theta1_0),
            ("theta2_0", self.theta2_0),
            ("x0", self.x0),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// `K0 = Kv·Kd`
    pub fn k0(&self) -> f64 {
        self.kv * self.kd
    }

    /// Averaged phase model of the same loop (triangular characteristic).
    pub fn phase_model(&self) -> Result<LoopParameters> {
        LoopParameters::new(
            self.tau1,
            self.tau2,
            self.k0(),
            TRIANGULAR_SLOPE,
            self.omega1 - self.omega2_free,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpaceState {
    pub theta1: f64,
    pub theta2: f64,
    pub x: f64,
}

impl SignalSpaceState {
    pub fn phase_error(&self) -> f64 {
        self.theta1 - self.theta2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    pub t: f64,
    pub state: SignalSpaceState,
    /// Multiplier output on the interval starting at `t`.
    pub phi: f64,
    /// Whether `t` is a switching instant rather than a base-grid point.
    pub switching: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalTrajectory {
    pub samples: Vec<SignalSample>,
    pub switch_count: usize,
}

/// `sign(sin θ1 · cos θ2)`, zero on the switching surfaces.
pub fn multiplier_output(theta1: f64, theta2: f64) -> f64 {
    let v = theta1.sin() * theta2.cos();
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Index `m` with `θ ∈ [m·π + offset, (m+1)·π + offset)`.
fn band_index(theta: f64, offset: f64) -> i64 {
    ((theta - offset) / PI).floor() as i64
}

fn parity_sign(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// First `u ∈ [0, span]` where the quadratic `θ(u) = c + v u + a u²/2`
/// leaves its band through `level`. `upward` selects the upper boundary.
/// A start on the boundary counts only when the motion points outward.
fn first_exit(c: f64, v: f64, a: f64, level: f64, upward: bool, span: f64, tol: f64) -> Option<f64> {
    // outward distance past the boundary; positive means outside
    let sign = if upward { 1.0 } else { -1.0 };
    let q = |u: f64| sign * (c + v * u + 0.5 * a * u * u - level);
    let mut cuts = vec![0.0];
    if a != 0.0 {
        let vertex = -v / a;
        if vertex > 0.0 && vertex < span {
            cuts.push(vertex);
        }
    }
    cuts.push(span);
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (qlo, qhi) = (q(lo), q(hi));
        if qlo >= 0.0 {
            if qhi > qlo {
                return Some(lo);
            }
            continue;
        }
        if qhi < 0.0 {
            continue;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if q(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Some(hi);
    }
    None
}

/// Simulates the waveform-level loop on `[0, horizon]` with base step `dt`.
pub fn simulate_signal_space(p: &SignalParams, horizon: f64, dt: f64) -> Result<SignalTrajectory> {
    p.validate()?;
    let dt_max = TAU / (STEPS_PER_PERIOD * p.omega1);
    if !(dt > 0.0 && dt <= dt_max * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter { name: "dt", value: dt });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
        });
    }
    let theta1_at = |t: f64| p.theta1_0 + p.omega1 * t;
    let bisect_tol = 1e-12 * dt;
    let steps = (horizon / dt).ceil() as usize;

    // sin θ1 > 0 on (2mπ, (2m+1)π); θ1 only increases
    let mut band1 = band_index(p.theta1_0, 0.0);
    // cos θ2 > 0 on (−π/2 + 2mπ, π/2 + 2mπ)
    let mut band2 = band_index(p.theta2_0, -FRAC_PI_2);
    let mut theta2 = p.theta2_0;
    let mut x = p.x0;
    // θ2 exactly on a cos-zero: take the side it moves into
    if ((theta2 + FRAC_PI_2) / PI).fract() == 0.0 {
        let phi = parity_sign(band1) * parity_sign(band2);
        let v = p.omega2_free + p.kv * (x / p.tau1 + p.tau2 * p.kd * phi / p.tau1);
        if v < 0.0 {
            band2 -= 1;
        }
    }

    let state = |t: f64, theta2: f64, x: f64| SignalSpaceState {
        theta1: theta1_at(t),
        theta2,
        x,
    };
    let mut samples = Vec::with_capacity(steps + 1);
    let mut switch_count = 0usize;
    let phi0 = parity_sign(band1) * parity_sign(band2);
    samples.push(SignalSample {
        t: 0.0,
        state: state(0.0, theta2, x),
        phi: phi0,
        switching: false,
    });

    for n in 0..steps {
        let t_start = n as f64 * dt;
        let t_end = ((n + 1) as f64 * dt).min(horizon);
        let mut t = t_start;
        while t < t_end {
            let phi = parity_sign(band1) * parity_sign(band2);
            let span = t_end - t;
            // next reference switching, exact
            let t1 = ((band1 + 1) as f64 * PI - p.theta1_0) / p.omega1;
            let u1 = (t1 - t).max(0.0);
            let v = p.omega2_free + p.kv * (x / p.tau1 + p.tau2 * p.kd * phi / p.tau1);
            let acc = p.kv * p.kd * phi / p.tau1;
            let lower = band2 as f64 * PI - FRAC_PI_2;
            let upper = lower + PI;
            let limit = span.min(u1);
            let hit_up = first_exit(theta2, v, acc, upper, true, limit, bisect_tol);
            let hit_down = first_exit(theta2, v, acc, lower, false, limit, bisect_tol);

            enum Event {
                Reference,
                VcoUp,
                VcoDown,
                None,
            }
            let mut u = span;
            let mut event = Event::None;
            if u1 <= span {
                u = u1;
                event = Event::Reference;
            }
            if let Some(h) = hit_up {
                if h < u || (h <= u && matches!(event, Event::None)) {
                    u = h;
                    event = Event::VcoUp;
                }
            }
            if let Some(h) = hit_down {
                if h < u || (h <= u && matches!(event, Event::None)) {
                    u = h;
                    event = Event::VcoDown;
                }
            }

            theta2 = match event {
                Event::VcoUp => upper,
                Event::VcoDown => lower,
                _ => theta2 + v * u + 0.5 * acc * u * u,
            };
            x += p.kd * phi * u;
            t = match event {
                Event::Reference => t1,
                _ => t + u,
            };
            match event {
                Event::Reference => band1 += 1,
                Event::VcoUp => band2 += 1,
                Event::VcoDown => band2 -= 1,
                Event::None => {}
            }
            let switching = !matches!(event, Event::None);
            if switching {
                switch_count += 1;
                if t >= t_end {
                    t = t_end;
                }
            } else {
                t = t_end;
            }
            samples.push(SignalSample {
                t,
                state: state(t, theta2, x),
                phi: parity_sign(band1) * parity_sign(band2),
                switching: switching && t < t_end,
            });
        }
    }
    Ok(SignalTrajectory {
        samples,
        switch_count,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelComparison {
    pub sup_phase_gap: f64,
    /// `(t, |θΔ_signal − θΔ_phase|)` on a uniform grid.
    pub gap_curve: Vec<(f64, f64)>,
    /// `ω1 < 100·K0/τ1`: averaging is not expected to hold.
    pub advisory: bool,
}

impl ModelComparison {
    /// Largest gap on `[t_from, t_to]`.
    pub fn sup_between(&self, t_from: f64, t_to: f64) -> f64 {
        self.gap_curve
            .iter()
            .filter(|(t, _)| *t >= t_from && *t <= t_to)
            .map(|(_, g)| *g)
            .fold(0.0, f64::max)
    }
}

/// Loop time constant `1/min|Re λ|` of the averaged model.
pub fn loop_time_constant(p: &SignalParams) -> Result<f64> {
    let model = p.phase_model()?;
    Ok(1.0 / slowest_stable_rate(&model))
}

/// Runs both models from matched initial conditions and reports the phase
/// gap, sampled at `points` instants.
pub fn compare_models_sampled(p: &SignalParams, horizon: f64, points: usize) -> Result<ModelComparison> {
    p.validate()?;
    let model = p.phase_model()?;
    let dt = TAU / (STEPS_PER_PERIOD * p.omega1);
    let signal = simulate_signal_space(p, horizon, dt)?;
    let grid: Vec<(f64, f64)> = signal
        .samples
        .iter()
        .filter(|s| !s.switching)
        .map(|s| (s.t, s.state.phase_error()))
        .collect();
    let points = points.max(2);
    let stride = (grid.len() / points).max(1);

    let opts = IntegratorOptions {
        max_step: 0.05 / slowest_stable_rate(&model).max(model.b_k0()).max(1e-12),
        ..IntegratorOptions::default()
    };
    // the phase model uses x/Kd as its filter state
    let mut phase_state = [p.theta1_0 - p.theta2_0, p.x0 / p.kd];
    let mut t_phase = 0.0;
    let mut gap_curve = Vec::with_capacity(points + 1);
    let mut sup: f64 = 0.0;
    for (i, &(t, theta_signal)) in grid.iter().enumerate() {
        if i % stride != 0 && i != grid.len() - 1 {
            continue;
        }
        if t > t_phase {
            let leg = IntegratorOptions {
                max_time: t - t_phase,
                ..opts
            };
            let traj = integrate(System::Phase, phase_state, &model, &leg, Direction::Forward, &StopSpec::none())?;
            phase_state = traj.last().state;
            t_phase = t;
        }
        let gap = (theta_signal - phase_state[0]).abs();
        sup = sup.max(gap);
        gap_curve.push((t, gap));
    }
    Ok(ModelComparison {
        sup_phase_gap: sup,
        gap_curve,
        advisory: p.omega1 < 100.0 * model.b_k0(),
    })
}

pub fn compare_models(p: &SignalParams, horizon: f64) -> Result<ModelComparison> {
    compare_models_sampled(p, horizon, 2000)
}
