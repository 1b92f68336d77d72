//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns either a JSON string or a
//! flat `Float64Array` so the page needs no glue beyond `wasm-bindgen`.

use pll_lockin::numeric::{default_options, default_seed_offset, simulate_lock_in, trace_separatrix};
use pll_lockin::{classify_stable, lock_in_analytic, lock_in_numeric, LockCheck, LoopParameters, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Summary {
    pub case: String,
    pub omega_l_analytic: f64,
    pub omega_l_numeric: f64,
    pub s_prime_at_break: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Serialize)]
pub struct StepResponse {
    pub outcome: String,
    pub omega_l: f64,
    /// Interleaved `t, θ, y` triples.
    pub points: Vec<f64>,
}

fn params(tau1: f64, tau2: f64, k0: f64, slope_k: f64) -> Result<LoopParameters> {
    LoopParameters::new(tau1, tau2, k0, slope_k, 0.0)
}

pub fn summary(tau1: f64, tau2: f64, k0: f64, slope_k: f64) -> Result<Summary> {
    let p = params(tau1, tau2, k0, slope_k)?;
    let a = lock_in_analytic(&p)?;
    let n = lock_in_numeric(&p, &default_options(&p))?;
    Ok(Summary {
        case: classify_stable(&p).name().to_string(),
        omega_l_analytic: a.omega_l,
        omega_l_numeric: n.omega_l,
        s_prime_at_break: a.diagnostics["s_prime_at_break"],
        relative_gap: (a.omega_l - n.omega_l).abs() / a.omega_l,
    })
}

/// Upper separatrix of the equivalent model from `θ = π` down to `θ = 0`,
/// mirrored to the lower one, as interleaved `θ, y` pairs.
pub fn separatrix_points(tau1: f64, tau2: f64, k0: f64, slope_k: f64) -> Result<Vec<f64>> {
    let p = params(tau1, tau2, k0, slope_k)?;
    let trace = trace_separatrix(&p, default_seed_offset(&p), &default_options(&p))?;
    let mut out = Vec::with_capacity(trace.trajectory.samples.len() * 4);
    for s in &trace.trajectory.samples {
        out.extend_from_slice(&s.state);
    }
    for s in trace.trajectory.samples.iter().rev() {
        out.extend_from_slice(&[-s.state[0], -s.state[1]]);
    }
    Ok(out)
}

/// Frequency step of size `omega` from the locked state, in `(θ, y)`.
pub fn step_response(tau1: f64, tau2: f64, k0: f64, slope_k: f64, omega: f64) -> Result<StepResponse> {
    let p = params(tau1, tau2, k0, slope_k)?;
    let (outcome, traj) = simulate_lock_in(&p, omega, &default_options(&p))?;
    let stepped = p.with_omega_delta(omega)?;
    let mut points = Vec::with_capacity(traj.samples.len() * 3);
    for (s, e) in traj.samples.iter().zip(traj.equiv_states(&stepped)) {
        points.extend_from_slice(&[s.t, e.theta_delta, e.y]);
    }
    Ok(StepResponse {
        outcome: match outcome {
            LockCheck::Locks => "locks",
            LockCheck::Slips => "slips",
            LockCheck::Undetermined => "undetermined",
        }
        .to_string(),
        omega_l: lock_in_analytic(&p)?.omega_l,
        points,
    })
}

fn js_error(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen(js_name = lockIn)]
pub fn lock_in_js(tau1: f64, tau2: f64, k0: f64, slope_k: f64) -> std::result::Result<String, JsValue> {
    let s = summary(tau1, tau2, k0, slope_k).map_err(js_error)?;
    serde_json::to_string(&s).map_err(js_error)
}

#[wasm_bindgen(js_name = separatrix)]
pub fn separatrix_js(tau1: f64, tau2: f64, k0: f64, slope_k: f64) -> std::result::Result<Vec<f64>, JsValue> {
    separatrix_points(tau1, tau2, k0, slope_k).map_err(js_error)
}

#[wasm_bindgen(js_name = stepResponse)]
pub fn step_response_js(tau1: f64, tau2: f64, k0: f64, slope_k: f64, omega: f64) -> std::result::Result<String, JsValue> {
    let r = step_response(tau1, tau2, k0, slope_k, omega).map_err(js_error)?;
    serde_json::to_string(&r).map_err(js_error)
}
