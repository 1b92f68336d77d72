//! Loop parameters, the zigzag phase-detector characteristic and the two
//! equivalent autonomous descriptions of the loop.
//!
//! The phase model is
//!
//! ```text
//! x'  = φ(θ)
//! θ'  = ωΔ − (K0/τ1)(x + τ2 φ(θ))
//! ```
//!
//! and the equivalent model, obtained with `y = θ'`, is
//!
//! ```text
//! θ'  = y
//! y'  = −(K0 τ2/τ1) φ'(θ) y − (K0/τ1) φ(θ)
//! ```
//!
//! The second form does not depend on the frequency deviation, which is what
//! makes the separatrix computation shift-free.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute band (rad, on the wrapped coordinate) inside which a phase is
/// treated as sitting on a kink of the characteristic.
pub const BREAKPOINT_TOL: f64 = 1e-12;

/// Slope of the triangular characteristic, `2/π`.
pub const TRIANGULAR_SLOPE: f64 = 2.0 / PI;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// All constants of the loop.
///
/// `a = τ2/τ1` and `b = 1/τ1` are always recomputed from the stored time
/// constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopParameters {
    tau1: f64,
    tau2: f64,
    k0: f64,
    slope_k: f64,
    omega_delta_free: f64,
}

impl LoopParameters {
    pub fn new(tau1: f64, tau2: f64, k0: f64, slope_k: f64, omega_delta_free: f64) -> Result<Self> {
        let check = |name: &'static str, v: f64, ok: bool| {
            if v.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value: v })
            }
        };
        check("tau1", tau1, tau1 > 0.0)?;
        check("tau2", tau2, tau2 > 0.0)?;
        check("k0", k0, k0 > 0.0)?;
        check("slope_k", slope_k, slope_k > 1.0 / PI)?;
        check("omega_delta_free", omega_delta_free, true)?;
        Ok(Self {
            tau1,
            tau2,
            k0,
            slope_k,
            omega_delta_free,
        })
    }

    /// Triangular characteristic (`k = 2/π`) with zero detuning.
    pub fn triangular(tau1: f64, tau2: f64, k0: f64) -> Result<Self> {
        Self::new(tau1, tau2, k0, TRIANGULAR_SLOPE, 0.0)
    }

    pub fn with_omega_delta(mut self, omega_delta_free: f64) -> Result<Self> {
        if !omega_delta_free.is_finite() {
            return Err(Error::InvalidParameter {
                name: "omega_delta_free",
                value: omega_delta_free,
            });
        }
        self.omega_delta_free = omega_delta_free;
        Ok(self)
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn slope_k(&self) -> f64 {
        self.slope_k
    }

    pub fn omega_delta_free(&self) -> f64 {
        self.omega_delta_free
    }

    /// `τ2/τ1`
    pub fn a(&self) -> f64 {
        self.tau2 / self.tau1
    }

    /// `1/τ1`
    pub fn b(&self) -> f64 {
        1.0 / self.tau1
    }

    /// Proportional gain group `a·K0 = K0 τ2/τ1`.
    pub fn a_k0(&self) -> f64 {
        self.k0 * self.tau2 / self.tau1
    }

    /// Integral gain group `b·K0 = K0/τ1`.
    pub fn b_k0(&self) -> f64 {
        self.k0 / self.tau1
    }

    /// Filter state of the equilibria, `ωΔ τ1 / K0`.
    pub fn x_eq(&self) -> f64 {
        self.x_eq_for(self.omega_delta_free)
    }

    /// Equilibrium filter state for an arbitrary deviation.
    pub fn x_eq_for(&self, omega_delta: f64) -> f64 {
        omega_delta * self.tau1 / self.k0
    }
}

/// A point of the phase model: unwrapped phase error and filter state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub theta_delta: f64,
    pub x: f64,
}

impl PhaseState {
    pub fn new(theta_delta: f64, x: f64) -> Self {
        Self { theta_delta, x }
    }
}

/// A point of the equivalent model: unwrapped phase error and its rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivState {
    pub theta_delta: f64,
    pub y: f64,
}

impl EquivState {
    pub fn new(theta_delta: f64, y: f64) -> Self {
        Self { theta_delta, y }
    }
}

/// Position of the rising segment index `j` and local coordinate.
///
/// The period containing `θ` is `[−1/k + 2πj, 2π − 1/k + 2πj)`; the returned
/// local coordinate lies in `[−1/k, 2π − 1/k)`.
fn local_coordinate(theta: f64, k: f64) -> (i64, f64) {
    let start = -1.0 / k;
    let j = ((theta - start) / TAU).floor();
    let mut local = theta - TAU * j;
    // guard against rounding pushing the value onto the next period start
    if local >= start + TAU {
        local -= TAU;
        return (j as i64 + 1, local);
    }
    (j as i64, local)
}

/// Normalized zigzag characteristic: `kθ` on `[−1/k, 1/k]`,
/// `(πk − kθ)/(πk − 1)` on `[1/k, 2π − 1/k]`, extended 2π-periodically.
pub fn pd_value(theta: f64, slope_k: f64) -> f64 {
    let (_, local) = local_coordinate(theta, slope_k);
    if local <= 1.0 / slope_k {
        slope_k * local
    } else {
        (PI * slope_k - slope_k * local) / (PI * slope_k - 1.0)
    }
}

/// Derivative of the characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdSlope {
    Slope(f64),
    /// `θ` lies on a kink (within [`BREAKPOINT_TOL`]); no single slope exists.
    Breakpoint,
}

impl PdSlope {
    pub fn value(self) -> Option<f64> {
        match self {
            PdSlope::Slope(s) => Some(s),
            PdSlope::Breakpoint => None,
        }
    }
}

/// Distance on the circle from `theta` to the nearest kink `±1/k (mod 2π)`.
pub fn kink_distance(theta: f64, slope_k: f64) -> f64 {
    let w = wrap_angle(theta);
    let inv = 1.0 / slope_k;
    let d1 = wrap_angle(w - inv).abs();
    let d2 = wrap_angle(w + inv).abs();
    d1.min(d2)
}

pub fn is_breakpoint(theta: f64, slope_k: f64) -> bool {
    kink_distance(theta, slope_k) <= BREAKPOINT_TOL
}

pub fn pd_slope(theta: f64, slope_k: f64) -> PdSlope {
    if is_breakpoint(theta, slope_k) {
        return PdSlope::Breakpoint;
    }
    let (_, local) = local_coordinate(theta, slope_k);
    if local < 1.0 / slope_k {
        PdSlope::Slope(slope_k)
    } else {
        PdSlope::Slope(-slope_k / (PI * slope_k - 1.0))
    }
}

/// One affine segment of the characteristic, `φ(θ) = slope·θ + intercept`,
/// valid on a single period's rising or falling piece but usable beyond it.
///
/// Integrators evaluate the vector field through a fixed segment across a
/// whole step, so the field they see is smooth; kink crossings are handled as
/// events that select the next segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdSegment {
    pub slope: f64,
    pub intercept: f64,
    pub rising: bool,
    /// Period index `j`.
    pub period: i64,
}

impl PdSegment {
    pub fn rising(slope_k: f64, period: i64) -> Self {
        let shift = TAU * period as f64;
        Self {
            slope: slope_k,
            intercept: -slope_k * shift,
            rising: true,
            period,
        }
    }

    pub fn falling(slope_k: f64, period: i64) -> Self {
        let shift = TAU * period as f64;
        let m = -slope_k / (PI * slope_k - 1.0);
        Self {
            slope: m,
            intercept: PI * slope_k / (PI * slope_k - 1.0) - m * shift,
            rising: false,
            period,
        }
    }

    /// Segment containing `theta`. On a kink, `heading` (sign of the phase
    /// velocity) picks the segment being entered.
    pub fn locate(theta: f64, slope_k: f64, heading: f64) -> Self {
        let inv = 1.0 / slope_k;
        let (j, local) = local_coordinate(theta, slope_k);
        let on_start = (local - (-inv)).abs() <= BREAKPOINT_TOL;
        let on_mid = (local - inv).abs() <= BREAKPOINT_TOL;
        let on_end = (local - (TAU - inv)).abs() <= BREAKPOINT_TOL;
        if on_mid {
            return if heading >= 0.0 {
                Self::falling(slope_k, j)
            } else {
                Self::rising(slope_k, j)
            };
        }
        if on_start {
            return if heading >= 0.0 {
                Self::rising(slope_k, j)
            } else {
                Self::falling(slope_k, j - 1)
            };
        }
        if on_end {
            return if heading >= 0.0 {
                Self::rising(slope_k, j + 1)
            } else {
                Self::falling(slope_k, j)
            };
        }
        if local < inv {
            Self::rising(slope_k, j)
        } else {
            Self::falling(slope_k, j)
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.slope * theta + self.intercept
    }

    /// Kinks bounding this segment, `(lower, upper)`.
    pub fn bounds(&self, slope_k: f64) -> (f64, f64) {
        let inv = 1.0 / slope_k;
        let shift = TAU * self.period as f64;
        if self.rising {
            (shift - inv, shift + inv)
        } else {
            (shift + inv, shift + TAU - inv)
        }
    }
}

/// Right-hand side of the phase model, returned as `(dx/dt, dθ/dt)`.
pub fn rhs_phase(state: PhaseState, params: &LoopParameters) -> (f64, f64) {
    let phi = pd_value(state.theta_delta, params.slope_k);
    phase_field(state, params, phi)
}

pub(crate) fn phase_field(state: PhaseState, params: &LoopParameters, phi: f64) -> (f64, f64) {
    let dx = phi;
    let dtheta = params.omega_delta_free - params.b_k0() * (state.x + params.tau2 * phi);
    (dx, dtheta)
}

/// Right-hand side of the equivalent model, returned as `(dθ/dt, dy/dt)`.
///
/// Fails on a kink, where the slope of the characteristic is undefined.
pub fn rhs_equiv(state: EquivState, params: &LoopParameters) -> Result<(f64, f64)> {
    let slope = pd_slope(state.theta_delta, params.slope_k)
        .value()
        .ok_or(Error::Breakpoint {
            theta: state.theta_delta,
        })?;
    let phi = pd_value(state.theta_delta, params.slope_k);
    Ok(equiv_field(state, params, phi, slope))
}

pub(crate) fn equiv_field(state: EquivState, params: &LoopParameters, phi: f64, slope: f64) -> (f64, f64) {
    let dy = -params.a_k0() * slope * state.y - params.b_k0() * phi;
    (state.y, dy)
}

/// `y = ωΔ − (K0/τ1)(x + τ2 φ(θ))`.
pub fn phase_to_equiv(state: PhaseState, params: &LoopParameters) -> EquivState {
    let phi = pd_value(state.theta_delta, params.slope_k);
    let y = params.omega_delta_free - params.b_k0() * (state.x + params.tau2 * phi);
    EquivState::new(state.theta_delta, y)
}

pub fn equiv_to_phase(state: EquivState, params: &LoopParameters) -> PhaseState {
    let phi = pd_value(state.theta_delta, params.slope_k);
    let x = (params.omega_delta_free - state.y) / params.b_k0() - params.tau2 * phi;
    PhaseState::new(state.theta_delta, x)
}
