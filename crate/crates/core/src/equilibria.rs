//! Equilibria of the loop and their linearizations.
//!
//! Per 2π period there is a stable point at `θ = 0` and a saddle at `θ = π`,
//! both with filter state `ωΔ τ1/K0` (equivalently `y = 0`). Around the stable
//! point the equivalent system is linear with matrix `[[0, 1], [−bK0k, −aK0k]]`,
//! around the saddle with `[[0, 1], [bK0k/(πk−1), aK0k/(πk−1)]]`.

use std::f64::consts::PI;

pub use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::LoopParameters;

/// Relative width of the band around zero discriminant that is classified as
/// a degenerate node.
pub const DEGENERACY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StableKind {
    Node,
    DegenerateNode,
    Focus,
}

impl StableKind {
    pub fn name(self) -> &'static str {
        match self {
            StableKind::Node => "Node",
            StableKind::DegenerateNode => "DegenerateNode",
            StableKind::Focus => "Focus",
        }
    }
}

impl std::fmt::Display for StableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    StableNode,
    StableDegenerateNode,
    StableFocus,
    Saddle,
}

impl From<StableKind> for EquilibriumKind {
    fn from(kind: StableKind) -> Self {
        match kind {
            StableKind::Node => EquilibriumKind::StableNode,
            StableKind::DegenerateNode => EquilibriumKind::StableDegenerateNode,
            StableKind::Focus => EquilibriumKind::StableFocus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub theta_eq: f64,
    /// Filter state in the phase model.
    pub x_eq: f64,
    /// Phase-error rate in the equivalent model; always zero.
    pub y_eq: f64,
    pub kind: EquilibriumKind,
}

/// Eigen-decomposition of a 2×2 linearization in `(θ, y)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub jacobian: [[f64; 2]; 2],
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub v1: [Complex64; 2],
    pub v2: [Complex64; 2],
    /// Real and imaginary parts `(U, V)` of `v1` for a complex pair.
    pub real_imag: Option<([f64; 2], [f64; 2])>,
    /// Associated (generalized) vector for a double eigenvalue:
    /// `(J − λ) w = v1`.
    pub associated: Option<[f64; 2]>,
}

impl EigenSystem {
    /// `‖J v − λ v‖` for eigenpair `index` (1 or 2).
    pub fn residual(&self, index: usize) -> f64 {
        let (lambda, v) = match index {
            1 => (self.lambda1, self.v1),
            _ => (self.lambda2, self.v2),
        };
        let j = &self.jacobian;
        let r0 = v[0] * j[0][0] + v[1] * j[0][1] - lambda * v[0];
        let r1 = v[0] * j[1][0] + v[1] * j[1][1] - lambda * v[1];
        (r0.norm_sqr() + r1.norm_sqr()).sqrt()
    }

    pub fn vector_norm(&self, index: usize) -> f64 {
        let v = if index == 1 { self.v1 } else { self.v2 };
        (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
    }
}

/// `(aK0)² − 4bK0/k`, whose sign selects the stable-point type.
pub fn discriminant(params: &LoopParameters) -> f64 {
    let ak0 = params.a_k0();
    ak0 * ak0 - 4.0 * params.b_k0() / params.slope_k()
}

pub fn classify_stable(params: &LoopParameters) -> StableKind {
    let ak0 = params.a_k0();
    let gain = 4.0 * params.b_k0() / params.slope_k();
    let d = ak0 * ak0 - gain;
    let eta = DEGENERACY_BAND * (ak0 * ak0).max(gain);
    if d > eta {
        StableKind::Node
    } else if d < -eta {
        StableKind::Focus
    } else {
        StableKind::DegenerateNode
    }
}

pub fn find_equilibria(params: &LoopParameters) -> [Equilibrium; 2] {
    let x_eq = params.x_eq();
    [
        Equilibrium {
            theta_eq: 0.0,
            x_eq,
            y_eq: 0.0,
            kind: classify_stable(params).into(),
        },
        Equilibrium {
            theta_eq: PI,
            x_eq,
            y_eq: 0.0,
            kind: EquilibriumKind::Saddle,
        },
    ]
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

pub fn stable_jacobian(params: &LoopParameters) -> [[f64; 2]; 2] {
    let k = params.slope_k();
    [[0.0, 1.0], [-params.b_k0() * k, -params.a_k0() * k]]
}

pub fn saddle_jacobian(params: &LoopParameters) -> [[f64; 2]; 2] {
    let k = params.slope_k();
    let g = PI * k - 1.0;
    [[0.0, 1.0], [params.b_k0() * k / g, params.a_k0() * k / g]]
}

/// Linearization at the stable point. Eigenvectors have first component 1.
pub fn stable_eigensystem(params: &LoopParameters) -> EigenSystem {
    let k = params.slope_k();
    let a = params.a_k0() * k;
    let b = params.b_k0() * k;
    let jacobian = stable_jacobian(params);
    match classify_stable(params) {
        StableKind::Node => {
            let root = (a * a - 4.0 * b).sqrt();
            let l2 = -(a + root) / 2.0;
            // product of the roots is b
            let l1 = b / l2;
            EigenSystem {
                jacobian,
                lambda1: real(l1),
                lambda2: real(l2),
                v1: [real(1.0), real(l1)],
                v2: [real(1.0), real(l2)],
                real_imag: None,
                associated: None,
            }
        }
        StableKind::DegenerateNode => {
            let l = -a / 2.0;
            EigenSystem {
                jacobian,
                lambda1: real(l),
                lambda2: real(l),
                v1: [real(1.0), real(l)],
                v2: [real(1.0), real(l)],
                real_imag: None,
                associated: Some([1.0, 1.0 - a / 2.0]),
            }
        }
        StableKind::Focus => {
            let im = (4.0 * b - a * a).sqrt() / 2.0;
            let l1 = Complex64::new(-a / 2.0, im);
            EigenSystem {
                jacobian,
                lambda1: l1,
                lambda2: l1.conj(),
                v1: [real(1.0), l1],
                v2: [real(1.0), l1.conj()],
                real_imag: Some(([1.0, -a / 2.0], [0.0, im])),
                associated: None,
            }
        }
    }
}

/// Linearization at the saddle. `lambda1 > 0 > lambda2`; eigenvectors have
/// second component 1.
pub fn saddle_eigensystem(params: &LoopParameters) -> EigenSystem {
    let k = params.slope_k();
    let g = PI * k - 1.0;
    let a = params.a_k0() * k;
    let b = params.b_k0() * k;
    let jacobian = saddle_jacobian(params);
    let root = (a * a + 4.0 * b * g).sqrt();
    let l1 = (a + root) / (2.0 * g);
    let l2 = -(b / g) / l1;
    // X1 first component (√(a² + 4bg) − a)/(2b), rationalized
    let x1 = 2.0 * g / (root + a);
    let x2 = -(root + a) / (2.0 * b);
    EigenSystem {
        jacobian,
        lambda1: real(l1),
        lambda2: real(l2),
        v1: [real(x1), real(1.0)],
        v2: [real(x2), real(1.0)],
        real_imag: None,
        associated: None,
    }
}

/// Slowest decay rate `min |Re λ|` of the stable point, in 1/s.
pub fn slowest_stable_rate(params: &LoopParameters) -> f64 {
    let eig = stable_eigensystem(params);
    eig.lambda1.re.abs().min(eig.lambda2.re.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rhs_phase, PhaseState, TRIANGULAR_SLOPE};
    use approx::assert_relative_eq;

    fn tri(tau1: f64, tau2: f64, k0: f64) -> LoopParameters {
        LoopParameters::triangular(tau1, tau2, k0).unwrap()
    }

    /// Eigenvalues of a real 2×2 matrix from trace and determinant.
    fn eig2(m: [[f64; 2]; 2]) -> (Complex64, Complex64) {
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }

    #[test]
    fn equilibria_locations() {
        let p = tri(1.0, 1.0, 3.0);
        let [s, u] = find_equilibria(&p);
        assert_eq!((s.theta_eq, s.x_eq), (0.0, 0.0));
        assert_eq!((u.theta_eq, u.x_eq, u.kind), (PI, 0.0, EquilibriumKind::Saddle));

        let p = LoopParameters::new(2.0, 1.0, 4.0, TRIANGULAR_SLOPE, 1.0).unwrap();
        for e in find_equilibria(&p) {
            assert_eq!(e.x_eq, 0.5);
            let (dx, dt) = rhs_phase(PhaseState::new(e.theta_eq, e.x_eq), &p);
            assert!(dx.abs() < 1e-15 && dt.abs() < 1e-15);
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_stable(&tri(1.0, 1.0, 10.0)), StableKind::Node);
        assert_eq!(classify_stable(&tri(1.0, 1.0, 1.0)), StableKind::Focus);
        assert_eq!(classify_stable(&tri(1.0, 1.0, 2.0 * PI)), StableKind::DegenerateNode);
    }

    #[test]
    fn stable_eigenvalues() {
        let e = stable_eigensystem(&tri(1.0, 1.0, 1.0));
        let a = 2.0 / PI;
        assert_eq!(e.lambda1.re, -a / 2.0);
        assert!(e.lambda1.im > 0.0);
        let e = stable_eigensystem(&tri(1.0, 1.0, 2.0 * PI));
        assert_eq!(e.lambda1, e.lambda2);
        assert_eq!(e.lambda1.re, -2.0 * PI * (2.0 / PI) / 2.0);
        let w = e.associated.unwrap();
        let j = e.jacobian;
        let l = e.lambda1.re;
        assert_relative_eq!(j[0][0] * w[0] + j[0][1] * w[1] - l * w[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(j[1][0] * w[0] + j[1][1] * w[1] - l * w[1], l, epsilon = 1e-12);

        let p = tri(1.0, 1.0, 10.0);
        let e = stable_eigensystem(&p);
        let (o1, o2) = eig2(stable_jacobian(&p));
        assert!(e.lambda1.im == 0.0 && e.lambda2.im == 0.0);
        assert!(e.lambda2.re < e.lambda1.re && e.lambda1.re < 0.0);
        assert_relative_eq!(e.lambda1.re, o1.re, max_relative = 1e-12);
        assert_relative_eq!(e.lambda2.re, o2.re, max_relative = 1e-12);
        for i in [1, 2] {
            assert!(e.residual(i) <= 1e-10 * e.vector_norm(i) * e.lambda1.norm().max(1.0));
        }
    }

    #[test]
    fn saddle_matches_direct_solve() {
        let p = tri(1.0, 1.0, 1.0);
        let e = saddle_eigensystem(&p);
        let (o1, o2) = eig2(saddle_jacobian(&p));
        assert_relative_eq!(e.lambda1.re, o1.re, max_relative = 1e-12);
        assert_relative_eq!(e.lambda2.re, o2.re, max_relative = 1e-12);
        assert!(e.lambda1.re * e.lambda2.re < 0.0);
        assert!(e.residual(2) <= 1e-10 * e.vector_norm(2) * e.lambda2.norm());
        assert!(e.residual(1) <= 1e-10 * e.vector_norm(1) * e.lambda1.norm());
        // X^u_2 as written: −(√((aK0k)² + 4bK0k(πk−1)) + aK0k)/(2bK0k)
        let k = 2.0 / PI;
        let expect = -((k * k + 4.0 * k * (PI * k - 1.0)).sqrt() + k) / (2.0 * k);
        assert_relative_eq!(e.v2[0].re, expect, max_relative = 1e-14);
    }
}
