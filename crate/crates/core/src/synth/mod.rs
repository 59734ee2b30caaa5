//! Compile measurement bases into `{rz, ry, cx}` circuits, plus waveplate
//! settings for single-qubit photonic measurements.
//!
//! Conventions: `Rz(t) = diag(e^{-it/2}, e^{it/2})`, `Ry(t) = exp(-i t σ_y / 2)`,
//! `cx` lists `[control, target]`. Qubit 0 is the most significant tensor
//! factor. A circuit's unitary is `e^{i φ} G_n ... G_1` for gates in time order.

mod kak;
mod oneq;
mod qsd;

pub use kak::{canonical_gate, cnot_class, kak, KakDecomposition};
pub use oneq::{rotation_y, rotation_z, waveplates, zyz, WaveplateSetting, Zyz};
pub use qsd::synth_threequbit;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{identity, kron, phase_distance, trace_product, unitarity_defect, CMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("matrix is not unitary (defect {0:.2e})")]
    NotUnitary(f64),

    #[error("basis vectors are not orthonormal (defect {0:.2e})")]
    NotOrthonormal(f64),

    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    WrongSize { expected: usize, rows: usize, cols: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid circuit document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateName {
    Rz,
    Ry,
    Cx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: GateName,
    pub qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub angle: Option<f64>,
}

impl Gate {
    pub fn rz(q: usize, angle: f64) -> Self {
        Self {
            name: GateName::Rz,
            qubits: vec![q],
            angle: Some(angle),
        }
    }

    pub fn ry(q: usize, angle: f64) -> Self {
        Self {
            name: GateName::Ry,
            qubits: vec![q],
            angle: Some(angle),
        }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self {
            name: GateName::Cx,
            qubits: vec![control, target],
            angle: None,
        }
    }

    fn check(&self, width: usize) -> Result<(), SynthError> {
        let arity = match self.name {
            GateName::Cx => 2,
            _ => 1,
        };
        if self.qubits.len() != arity {
            return Err(SynthError::InvalidGate(format!("{:?} on {:?}", self.name, self.qubits)));
        }
        if self.qubits.iter().any(|&q| q >= width) {
            return Err(SynthError::InvalidGate(format!("qubit out of range in {:?}", self.qubits)));
        }
        if arity == 2 && self.qubits[0] == self.qubits[1] {
            return Err(SynthError::InvalidGate("cx with equal qubits".into()));
        }
        match (self.name, self.angle) {
            (GateName::Cx, None) => Ok(()),
            (GateName::Cx, Some(_)) => Err(SynthError::InvalidGate("cx takes no angle".into())),
            (_, Some(a)) if a.is_finite() => Ok(()),
            _ => Err(SynthError::InvalidGate(format!("{:?} needs a finite angle", self.name))),
        }
    }

    /// Unitary on `width` qubits.
    pub fn unitary(&self, width: usize) -> CMatrix {
        match self.name {
            GateName::Rz => embed_1q(&rotation_z(self.angle.unwrap_or(0.0)), self.qubits[0], width),
            GateName::Ry => embed_1q(&rotation_y(self.angle.unwrap_or(0.0)), self.qubits[0], width),
            GateName::Cx => cx_matrix(self.qubits[0], self.qubits[1], width),
        }
    }
}

pub fn embed_1q(g: &CMatrix, q: usize, width: usize) -> CMatrix {
    let left = identity(1 << q);
    let right = identity(1 << (width - q - 1));
    kron(&kron(&left, g), &right)
}

fn bit(index: usize, q: usize, width: usize) -> usize {
    (index >> (width - 1 - q)) & 1
}

pub fn cx_matrix(control: usize, target: usize, width: usize) -> CMatrix {
    let d = 1 << width;
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        let j = if bit(i, control, width) == 1 {
            i ^ (1 << (width - 1 - target))
        } else {
            i
        };
        m[(j, i)] = Complex64::new(1.0, 0.0);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub width: usize,
    pub global_phase: f64,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            global_phase: 0.0,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    /// Append `other`, relabelling its qubit `k` as `map[k]`.
    pub fn append_mapped(&mut self, other: &Circuit, map: &[usize]) {
        for g in &other.gates {
            self.gates.push(Gate {
                name: g.name,
                qubits: g.qubits.iter().map(|&q| map[q]).collect(),
                angle: g.angle,
            });
        }
        self.global_phase += other.global_phase;
    }

    pub fn cx_count(&self) -> usize {
        self.gates.iter().filter(|g| g.name == GateName::Cx).count()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.gates.iter().try_for_each(|g| g.check(self.width))
    }

    pub fn unitary(&self) -> CMatrix {
        let d = 1 << self.width;
        let mut u = identity(d);
        for g in &self.gates {
            u = g.unitary(self.width) * u;
        }
        u * Complex64::from_polar(1.0, self.global_phase)
    }

    /// Set the global phase so the circuit matches `target` as closely as possible.
    pub fn fix_phase_to(&mut self, target: &CMatrix) {
        self.global_phase = 0.0;
        let u = self.unitary();
        let ov = crate::linalg::trace_product(&u.adjoint(), target);
        if ov.norm() > 0.0 {
            self.global_phase = ov.arg();
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialisation")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let c: Circuit = serde_json::from_str(text).map_err(|e| SynthError::Format(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// One gate per line, angles with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let qs: Vec<String> = g.qubits.iter().map(|q| q.to_string()).collect();
            match g.angle {
                Some(a) => out.push_str(&format!("{} {} {:.16e}\n", name_str(g.name), qs.join(" "), a)),
                None => out.push_str(&format!("{} {}\n", name_str(g.name), qs.join(" "))),
            }
        }
        out
    }

    /// Drop rotations whose angle is a multiple of 4π (identity) and merge
    /// consecutive rotations of the same kind on the same qubit.
    pub fn simplify(&mut self) {
        let mut out: Vec<Gate> = Vec::with_capacity(self.gates.len());
        for g in self.gates.drain(..) {
            if let (Some(last), Some(a)) = (out.last_mut(), g.angle) {
                if last.name == g.name && last.qubits == g.qubits {
                    *last.angle.as_mut().unwrap() += a;
                    continue;
                }
            }
            out.push(g);
        }
        let four_pi = 4.0 * std::f64::consts::PI;
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut phase = 0.0;
        out.retain_mut(|g| match g.angle.as_mut() {
            None => true,
            Some(a) => {
                *a = a.rem_euclid(four_pi);
                if *a > two_pi {
                    *a -= four_pi;
                }
                // R(t ± 2π) = -R(t)
                if *a > std::f64::consts::PI {
                    *a -= two_pi;
                    phase += std::f64::consts::PI;
                } else if *a <= -std::f64::consts::PI {
                    *a += two_pi;
                    phase += std::f64::consts::PI;
                }
                a.abs() > 1e-13
            }
        });
        self.global_phase += phase;
        self.gates = out;
    }
}

fn name_str(n: GateName) -> &'static str {
    match n {
        GateName::Rz => "rz",
        GateName::Ry => "ry",
        GateName::Cx => "cx",
    }
}

pub(crate) fn check_unitary(u: &CMatrix, dim: usize, tol: f64) -> Result<(), SynthError> {
    if u.nrows() != dim || u.ncols() != dim {
        return Err(SynthError::WrongSize {
            expected: dim,
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(SynthError::NotUnitary(defect));
    }
    Ok(())
}

/// Unitary `U` whose row `k` is the conjugate of basis vector `k` (column `k`
/// of `basis`), so `U` maps basis vector `k` to `|k>`.
pub fn basis_to_unitary(basis: &CMatrix) -> Result<CMatrix, SynthError> {
    let d = basis.nrows();
    if basis.ncols() != d {
        return Err(SynthError::WrongSize {
            expected: d,
            rows: basis.nrows(),
            cols: basis.ncols(),
        });
    }
    let defect = unitarity_defect(basis);
    if defect > 1e-8 {
        return Err(SynthError::NotOrthonormal(defect));
    }
    Ok(basis.adjoint())
}

/// Reconstruction error of a circuit against a target, up to global phase.
pub fn reconstruction_error(c: &Circuit, target: &CMatrix) -> f64 {
    phase_distance(&c.unitary(), target)
}

/// Compile any unitary on one to three qubits.
pub fn compile(u: &CMatrix) -> Result<Circuit, SynthError> {
    match u.nrows() {
        2 => Ok(oneq::zyz_circuit(u, 0)?),
        4 => Ok(kak(u)?.circuit),
        8 => synth_threequbit(u),
        d => Err(SynthError::WrongSize {
            expected: 8,
            rows: d,
            cols: u.ncols(),
        }),
    }
}

/// Split `m` into `a ⊗ b` (`a` is `da × da`); `None` when `m` is not a tensor
/// product within 1e-9. Block `(p, q)` of `m` is `a[p, q] b`, so the heaviest
/// block fixes `b` and overlaps with it give `a`.
pub(crate) fn factor_kron(m: &CMatrix, da: usize, db: usize) -> Option<(CMatrix, CMatrix)> {
    let block = |p: usize, q: usize| m.view((p * db, q * db), (db, db)).into_owned();
    let (mut bp, mut bq, mut best) = (0, 0, -1.0);
    for p in 0..da {
        for q in 0..da {
            let n = block(p, q).norm();
            if n > best {
                (bp, bq, best) = (p, q, n);
            }
        }
    }
    if best <= 0.0 {
        return None;
    }
    let b = block(bp, bq);
    let bb = b.norm_squared();
    let a = CMatrix::from_fn(da, da, |p, q| trace_product(&b.adjoint(), &block(p, q)) / bb);
    let scale = Complex64::new(a.norm() / (da as f64).sqrt(), 0.0);
    let (a, b) = (a / scale, b * scale);
    if (kron(&a, &b) - m).norm() > 1e-9 {
        return None;
    }
    Some((a, b))
}
