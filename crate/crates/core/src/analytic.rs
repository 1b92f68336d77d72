//! Closed-form lock-in frequency.
//!
//! The upper separatrix of the equivalent system enters the saddle `(π, 0)`
//! along the eigenvector of its negative eigenvalue. Between `1/k` and `π`
//! the system is linear, so that separatrix is a straight line and its height
//! at the kink is known in closed form. From there a Cauchy problem of the
//! linear system around the stable point is solved back to `θ = 0`; how that
//! solution looks depends on whether the stable point is a node, a degenerate
//! node or a focus. The lock-in frequency is half the height reached at `θ = 0`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibria::{classify_stable, discriminant, StableKind};
use crate::error::{Error, Result};
use crate::model::LoopParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Analytic,
    Numeric,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Numeric => "numeric",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Coefficients of the Cauchy solution around the stable point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseCoefficients {
    pub case_tag: StableKind,
    pub c1: f64,
    pub c2: f64,
    /// Time (≤ 0) at which the solution started on `θ = 1/k` reaches `θ = 0`.
    pub t0: f64,
    pub lambda_s: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockInResult {
    pub omega_l: f64,
    pub case_tag: StableKind,
    pub method: Method,
    /// Height of the upper separatrix at the stable point, `S'(0)`.
    pub s_prime_at_zero: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl LockInResult {
    /// Lower separatrix of the phase model at the stable point,
    /// `Q(0, ωΔ) = (τ1/K0)(ωΔ − S'(0))`.
    pub fn lower_separatrix_at_stable(&self, params: &LoopParameters, omega_delta: f64) -> f64 {
        (omega_delta - self.s_prime_at_zero) / params.b_k0()
    }
}

/// `(aK0)² + 4bK0(π − 1/k)`
fn break_radicand(params: &LoopParameters) -> f64 {
    let ak0 = params.a_k0();
    ak0 * ak0 + 4.0 * params.b_k0() * (PI - 1.0 / params.slope_k())
}

/// Height of the upper separatrix at the kink `θ = 1/k`:
/// `(√((aK0)² + 4bK0(π − 1/k)) − aK0)/2`.
pub fn separatrix_slope_at_break(params: &LoopParameters) -> f64 {
    let ak0 = params.a_k0();
    let root = break_radicand(params).sqrt();
    // rationalized to avoid cancellation when aK0 dominates
    2.0 * params.b_k0() * (PI - 1.0 / params.slope_k()) / (root + ak0)
}

fn invalid(case: &'static str, detail: String) -> Error {
    Error::InvalidCase { case, detail }
}

fn node(params: &LoopParameters) -> Result<(f64, CaseCoefficients)> {
    let k = params.slope_k();
    let ak0 = params.a_k0();
    let d = discriminant(params);
    let ratio = break_radicand(params).sqrt() / d.sqrt();
    let c1 = (ratio + 1.0) / (2.0 * k);
    let c2 = (1.0 - ratio) / (2.0 * k);
    let r = -c2 / c1;
    if !(c1 > 0.0 && c2 < 0.0 && r > 0.0 && r < 1.0) {
        return Err(invalid(
            "Node",
            format!("c1 = {c1}, c2 = {c2}, -c2/c1 = {r}"),
        ));
    }
    // √((aK0k)² − 4bK0k) = k√d
    let root = k * d.sqrt();
    let exponent = 0.5 - ak0 * k / (2.0 * root);
    let s = c1 * root * (exponent * r.ln()).exp();
    let lambda = (-ak0 * k + root) / 2.0;
    let coeffs = CaseCoefficients {
        case_tag: StableKind::Node,
        c1,
        c2,
        t0: r.ln() / root,
        lambda_s: Complex64::new(lambda, 0.0),
    };
    Ok((s, coeffs))
}

fn degenerate(params: &LoopParameters) -> Result<(f64, CaseCoefficients)> {
    let k = params.slope_k();
    let ak0 = params.a_k0();
    let c2 = break_radicand(params).sqrt() / 2.0;
    let c1 = 1.0 / k - c2;
    let t0 = -1.0 / (c2 * k);
    if !(c2 > 0.0 && t0 < 0.0) {
        return Err(invalid("DegenerateNode", format!("c2 = {c2}, t0 = {t0}")));
    }
    let s = c2 * (ak0 / (2.0 * c2)).exp();
    let coeffs = CaseCoefficients {
        case_tag: StableKind::DegenerateNode,
        c1,
        c2,
        t0,
        lambda_s: Complex64::new(-ak0 * k / 2.0, 0.0),
    };
    Ok((s, coeffs))
}

fn focus(params: &LoopParameters) -> Result<(f64, CaseCoefficients)> {
    let k = params.slope_k();
    let ak0 = params.a_k0();
    let bk0 = params.b_k0();
    let c1 = 1.0 / k;
    let c2 = break_radicand(params).sqrt() / (k * (4.0 * bk0 / k - ak0 * ak0).sqrt());
    let a = ak0 * k;
    let spread = (4.0 * bk0 * k - a * a).sqrt();
    let lambda = Complex64::new(-a / 2.0, spread / 2.0);
    // principal branch: first crossing of θ = 0 in backward time
    let t0 = (-c1 / c2).atan() / lambda.im;
    let phase = t0 * lambda.im;
    if !(c1 > 0.0 && c2 > 0.0 && phase > -PI / 2.0 && phase < 0.0) {
        return Err(invalid(
            "Focus",
            format!("c1 = {c1}, c2 = {c2}, t0*Im(lambda) = {phase}"),
        ));
    }
    let decay = (t0 * lambda.re).exp();
    let (sin, cos) = phase.sin_cos();
    let s = -a * decay / 2.0 * (c1 * cos + c2 * sin) + decay * spread / 2.0 * (c2 * cos - c1 * sin);
    let coeffs = CaseCoefficients {
        case_tag: StableKind::Focus,
        c1,
        c2,
        t0,
        lambda_s: lambda,
    };
    Ok((s, coeffs))
}

/// `S'(0)`, the height of the upper separatrix at the stable point, together
/// with the coefficients of the case that produced it.
pub fn s_prime_at_target(params: &LoopParameters) -> Result<(f64, CaseCoefficients)> {
    match classify_stable(params) {
        StableKind::Node => node(params),
        StableKind::DegenerateNode => degenerate(params),
        StableKind::Focus => focus(params),
    }
}

pub fn lock_in_analytic(params: &LoopParameters) -> Result<LockInResult> {
    let (s, coeffs) = s_prime_at_target(params)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("s_prime_at_break".into(), separatrix_slope_at_break(params));
    diagnostics.insert("discriminant".into(), discriminant(params));
    diagnostics.insert("c1".into(), coeffs.c1);
    diagnostics.insert("c2".into(), coeffs.c2);
    diagnostics.insert("t0".into(), coeffs.t0);
    diagnostics.insert("lambda_s_re".into(), coeffs.lambda_s.re);
    diagnostics.insert("lambda_s_im".into(), coeffs.lambda_s.im);
    Ok(LockInResult {
        omega_l: s / 2.0,
        case_tag: coeffs.case_tag,
        method: Method::Analytic,
        s_prime_at_zero: s,
        diagnostics,
    })
}

/// Lock-in frequency for the triangular characteristic (`k = 2/π`), written
/// directly in terms of `aK0` and `bK0` without going through the general
/// zigzag coefficients. The case is taken from `params`, whose slope is
/// ignored otherwise.
pub fn lock_in_triangular(params: &LoopParameters) -> f64 {
    let ak0 = params.a_k0();
    let bk0 = params.b_k0();
    let tri = LoopParameters::triangular(params.tau1(), params.tau2(), params.k0())
        .expect("parameters already validated");
    match classify_stable(&tri) {
        StableKind::Node => {
            let d = (ak0 * ak0 - 2.0 * bk0 * PI).sqrt();
            let e = (ak0 * ak0 + 2.0 * bk0 * PI).sqrt();
            let c1 = PI / 4.0 * (e / d + 1.0);
            let c2 = PI / 4.0 * (1.0 - e / d);
            let exponent = 0.5 - ak0 / (2.0 * d);
            c1 * d / PI * (-c2 / c1).powf(exponent)
        }
        StableKind::DegenerateNode => {
            let c2 = (ak0 * ak0 + 2.0 * bk0 * PI).sqrt() / 2.0;
            c2 / 2.0 * (ak0 / (2.0 * c2)).exp()
        }
        StableKind::Focus => {
            let f = (2.0 * bk0 * PI - ak0 * ak0).sqrt();
            let e = (ak0 * ak0 + 4.0 * bk0 * (PI - PI / 2.0)).sqrt();
            let c1 = PI / 2.0;
            let c2 = PI * e / (2.0 * f);
            let re = -ak0 / PI;
            let im = f / PI;
            let t0 = (-c1 / c2).atan() / im;
            let decay = (t0 * re).exp();
            let (sin, cos) = (t0 * im).sin_cos();
            -ak0 * decay / (2.0 * PI) * (c1 * cos + c2 * sin)
                + decay * f / (2.0 * PI) * (c2 * cos - c1 * sin)
        }
    }
}
