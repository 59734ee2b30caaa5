//! The rotated-and-depolarised qubit probe and its tensor powers.
//!
//! A single copy is `rho = (1 - eps) U|0><0|U^dagger + eps I/2` with
//! `U = exp(-i (theta_x X + theta_y Y) / 2)`. The depolarising step is applied
//! after the rotation. All bounds are evaluated at `theta_x = theta_y = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix};

/// Largest supported number of simultaneously measured copies (d = 128).
pub const MAX_COPIES: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("decoherence strength {0} outside [0, 1)")]
    EpsilonOutOfRange(f64),

    #[error("depolarising probability {0} outside [0, 1]")]
    POutOfRange(f64),

    #[error("copies must be at least 1")]
    NoCopies,

    #[error("{0} copies exceeds the supported maximum of {MAX_COPIES}")]
    DimensionTooLarge(usize),

    #[error("expected a 2x2 density matrix, got {0}x{1}")]
    NotQubit(usize, usize),
}

pub fn check_epsilon(epsilon: f64) -> Result<(), ProbeError> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(ProbeError::EpsilonOutOfRange(epsilon))
    }
}

fn check_copies(m: usize) -> Result<(), ProbeError> {
    match m {
        0 => Err(ProbeError::NoCopies),
        m if m > MAX_COPIES => Err(ProbeError::DimensionTooLarge(m)),
        _ => Ok(()),
    }
}

/// Rotation generator `exp(-i (theta_x X + theta_y Y)/2)` applied to `|0>`.
fn rotated_zero(theta_x: f64, theta_y: f64) -> [Complex64; 2] {
    // exp(-i phi n.sigma / 2) = cos(phi/2) I - i sin(phi/2) n.sigma with
    // phi = |theta|, n = (theta_x, theta_y, 0)/phi.
    let phi = theta_x.hypot(theta_y);
    if phi == 0.0 {
        return [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    }
    let (s, c) = (phi / 2.0).sin_cos();
    let (nx, ny) = (theta_x / phi, theta_y / phi);
    // n.sigma |0> = (nx + i ny) |1>
    let amp1 = Complex64::new(0.0, -s) * Complex64::new(nx, ny);
    [Complex64::new(c, 0.0), amp1]
}

pub fn single_copy_state(theta_x: f64, theta_y: f64, epsilon: f64) -> Result<CMatrix, ProbeError> {
    check_epsilon(epsilon)?;
    let psi = rotated_zero(theta_x, theta_y);
    let mut rho = CMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            rho[(i, j)] = psi[i] * psi[j].conj() * (1.0 - epsilon);
        }
        rho[(i, i)] += Complex64::from(epsilon / 2.0);
    }
    Ok(rho)
}

/// `m`-fold tensor power of [`single_copy_state`]; copy `k` is tensor factor `k`.
pub fn multi_copy_state(
    theta_x: f64,
    theta_y: f64,
    epsilon: f64,
    m: usize,
) -> Result<CMatrix, ProbeError> {
    check_copies(m)?;
    let one = single_copy_state(theta_x, theta_y, epsilon)?;
    Ok(tensor_power(&one, m))
}

pub fn tensor_power(a: &CMatrix, m: usize) -> CMatrix {
    let mut out = a.clone();
    for _ in 1..m {
        out = linalg::kron(&out, a);
    }
    out
}

/// `(1 - p) rho + p I/2` on a single qubit.
pub fn depolarize(rho: &CMatrix, p: f64) -> Result<CMatrix, ProbeError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProbeError::POutOfRange(p));
    }
    if rho.nrows() != 2 || rho.ncols() != 2 {
        return Err(ProbeError::NotQubit(rho.nrows(), rho.ncols()));
    }
    Ok(rho.scale(1.0 - p) + linalg::identity(2).scale(p / 2.0))
}

/// State and parameter derivatives at the reference point.
#[derive(Debug, Clone)]
pub struct ModelDerivatives {
    pub state: CMatrix,
    pub d_theta_x: CMatrix,
    pub d_theta_y: CMatrix,
}

impl ModelDerivatives {
    pub fn derivative(&self, param: usize) -> &CMatrix {
        match param {
            0 => &self.d_theta_x,
            1 => &self.d_theta_y,
            _ => panic!("two-parameter model has no parameter {param}"),
        }
    }

    pub fn dimension(&self) -> usize {
        self.state.nrows()
    }
}

/// Analytic derivatives of `rho^{(x) m}` at `theta = 0`.
///
/// Single copy: `d_x rho = -(1-eps) Y/2`, `d_y rho = (1-eps) X/2`; for more
/// copies the Leibniz rule sums over the tensor slot being differentiated.
pub fn derivatives_at_origin(epsilon: f64, m: usize) -> Result<ModelDerivatives, ProbeError> {
    check_epsilon(epsilon)?;
    check_copies(m)?;
    let rho1 = single_copy_state(0.0, 0.0, epsilon)?;
    let dx1 = linalg::pauli_y().scale(-(1.0 - epsilon) / 2.0);
    let dy1 = linalg::pauli_x().scale((1.0 - epsilon) / 2.0);

    let mut state = rho1.clone();
    let mut dx = dx1.clone();
    let mut dy = dy1.clone();
    for _ in 1..m {
        dx = linalg::kron(&dx, &rho1) + linalg::kron(&state, &dx1);
        dy = linalg::kron(&dy, &rho1) + linalg::kron(&state, &dy1);
        state = linalg::kron(&state, &rho1);
    }
    Ok(ModelDerivatives {
        state,
        d_theta_x: dx,
        d_theta_y: dy,
    })
}

/// The probe family evaluated for a fixed number of copies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub epsilon: f64,
    pub copies: usize,
    pub reference_point: (f64, f64),
}

impl ProbeModel {
    /// Model with the reference point at the origin.
    pub fn new(epsilon: f64, copies: usize) -> Result<Self, ProbeError> {
        check_epsilon(epsilon)?;
        check_copies(copies)?;
        Ok(Self {
            epsilon,
            copies,
            reference_point: (0.0, 0.0),
        })
    }

    pub fn dimension(&self) -> usize {
        1 << self.copies
    }

    pub fn state(&self) -> CMatrix {
        self.state_at(self.reference_point.0, self.reference_point.1)
    }

    pub fn state_at(&self, theta_x: f64, theta_y: f64) -> CMatrix {
        multi_copy_state(theta_x, theta_y, self.epsilon, self.copies)
            .expect("validated at construction")
    }

    pub fn derivatives(&self) -> ModelDerivatives {
        derivatives_at_origin(self.epsilon, self.copies).expect("validated at construction")
    }

    /// Length of the single-copy Bloch vector.
    pub fn bloch_length(&self) -> f64 {
        1.0 - self.epsilon
    }
}
