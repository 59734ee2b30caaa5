use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_unitary, Circuit, Gate, SynthError};
use crate::linalg::CMatrix;

const PI: f64 = std::f64::consts::PI;

pub fn rotation_z(t: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::from_polar(1.0, -t / 2.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::from_polar(1.0, t / 2.0),
        ],
    )
}

pub fn rotation_y(t: f64) -> CMatrix {
    let (s, c) = (t / 2.0).sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
    )
}

/// `u = e^{i phase} Rz(alpha) Ry(beta) Rz(gamma)`, `beta ∈ [0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zyz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phase: f64,
}

impl Zyz {
    pub fn matrix(&self) -> CMatrix {
        rotation_z(self.alpha) * rotation_y(self.beta) * rotation_z(self.gamma)
            * Complex64::from_polar(1.0, self.phase)
    }
}

/// Wrap to `(-π, π]`, returning the number of `2π` shifts applied.
fn wrap(x: f64) -> (f64, i64) {
    let mut y = x;
    let mut n = 0;
    while y > PI {
        y -= 2.0 * PI;
        n += 1;
    }
    while y <= -PI {
        y += 2.0 * PI;
        n -= 1;
    }
    (y, n)
}

pub fn zyz(u: &CMatrix) -> Result<Zyz, SynthError> {
    check_unitary(u, 2, 1e-10)?;
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let mut phase = det.arg() / 2.0;
    let v = u * Complex64::from_polar(1.0, -phase);
    let (c, s) = (v[(0, 0)].norm(), v[(1, 0)].norm());
    let beta = 2.0 * s.atan2(c);
    let (sum, diff) = if s < 1e-12 {
        (2.0 * v[(1, 1)].arg(), 0.0)
    } else if c < 1e-12 {
        (0.0, 2.0 * v[(1, 0)].arg())
    } else {
        (2.0 * v[(1, 1)].arg(), 2.0 * v[(1, 0)].arg())
    };
    let (alpha, na) = wrap((sum + diff) / 2.0);
    let (gamma, ng) = wrap((sum - diff) / 2.0);
    // Rz(t + 2π) = -Rz(t)
    if (na + ng).rem_euclid(2) == 1 {
        phase += PI;
    }
    let mut out = Zyz {
        alpha,
        beta,
        gamma,
        phase: wrap(phase).0,
    };
    // Resolve the remaining sign ambiguity against the input.
    let rec = out.matrix();
    let ov = crate::linalg::trace_product(&rec.adjoint(), u);
    if ov.re < 0.0 {
        out.phase = wrap(out.phase + PI).0;
    }
    Ok(out)
}

/// Single-qubit circuit on qubit `q` (width `q + 1`), zero rotations dropped.
pub(crate) fn zyz_circuit(u: &CMatrix, q: usize) -> Result<Circuit, SynthError> {
    let e = zyz(u)?;
    let mut c = Circuit::new(q + 1);
    push_zyz(&mut c, &e, q);
    c.global_phase = e.phase;
    Ok(c)
}

/// Append gates for `e` on qubit `q` (time order `Rz(γ)`, `Ry(β)`, `Rz(α)`),
/// without the phase.
pub(crate) fn push_zyz(c: &mut Circuit, e: &Zyz, q: usize) {
    for g in [Gate::rz(q, e.gamma), Gate::ry(q, e.beta), Gate::rz(q, e.alpha)] {
        if g.angle.unwrap().abs() > 1e-13 {
            c.push(g);
        }
    }
}

/// Fast-axis angles in degrees for the sequence QWP(q1) · HWP(h) · QWP(q2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    pub q1_angle: f64,
    pub h_angle: f64,
    pub q2_angle: f64,
}

fn real_rotation(t: f64) -> CMatrix {
    let (s, c) = t.sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
    )
}

fn plate(theta_deg: f64, retardance: Complex64) -> CMatrix {
    let t = theta_deg.to_radians();
    let d = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            retardance,
        ],
    );
    real_rotation(t) * d * real_rotation(-t)
}

pub fn quarter_wave(theta_deg: f64) -> CMatrix {
    plate(theta_deg, Complex64::new(0.0, 1.0))
}

pub fn half_wave(theta_deg: f64) -> CMatrix {
    plate(theta_deg, Complex64::new(-1.0, 0.0))
}

impl WaveplateSetting {
    pub fn jones(&self) -> CMatrix {
        quarter_wave(self.q1_angle) * half_wave(self.h_angle) * quarter_wave(self.q2_angle)
    }
}

/// Clifford `V` with `V^† Z V = Y` and `V^† Y V = X`.
fn cyclic() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5, -0.5),
            Complex64::new(-0.5, -0.5),
            Complex64::new(0.5, -0.5),
            Complex64::new(0.5, 0.5),
        ],
    )
}

/// Waveplate angles realising `u` up to global phase.
///
/// `QWP(a/2) · HWP((a - b - c)/4) · QWP(-c/2)` equals `Ry(a) Rx(b) Ry(c)` up to
/// phase, and the YXY angles come from the ZYZ decomposition of `V u V^†`.
pub fn waveplates(u: &CMatrix) -> Result<WaveplateSetting, SynthError> {
    check_unitary(u, 2, 1e-8)?;
    let v = cyclic();
    let e = zyz(&(&v * u * v.adjoint()))?;
    let (a, b, c) = (e.alpha, e.beta, e.gamma);
    let norm = |deg: f64| {
        // fast axes are defined modulo 180°
        let x = deg.rem_euclid(180.0);
        if x > 90.0 {
            x - 180.0
        } else {
            x
        }
    };
    Ok(WaveplateSetting {
        q1_angle: norm((a / 2.0).to_degrees()),
        h_angle: norm(((a - b - c) / 4.0).to_degrees()),
        q2_angle: norm((-c / 2.0).to_degrees()),
    })
}
