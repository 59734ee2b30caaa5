//! Density-matrix simulation of `{rz, ry, cx}` circuits with depolarising
//! gate noise and classical readout flips, plus multinomial shot sampling.
//!
//! Noise acts after every gate on the gate's support. Everything here is
//! linear in the input operator, so derivatives of the probe state can be
//! pushed through the same channel to get noise-aware Fisher information.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{identity, kron, pauli_x, pauli_y, pauli_z, CMatrix};
use crate::synth::{embed_1q, Circuit, GateName, SynthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state has dimension {got}, circuit needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{name} must be a probability, got {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("unknown noise profile {0:?} (expected ideal, low or high)")]
    UnknownProfile(String),

    #[error("invalid circuit: {0}")]
    Circuit(#[from] SynthError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub gate1_error: f64,
    #[serde(default)]
    pub gate2_error: f64,
    #[serde(default)]
    pub readout_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseModel {
    pub fn new(gate1_error: f64, gate2_error: f64, readout_error: f64) -> Result<Self, SimError> {
        let n = Self {
            gate1_error,
            gate2_error,
            readout_error,
            name: None,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn ideal() -> Self {
        Self {
            gate1_error: 0.0,
            gate2_error: 0.0,
            readout_error: 0.0,
            name: Some("ideal".into()),
        }
    }

    /// Presets: `ideal`, `low` (1e-3 / 1e-2, readout 1e-2), `high` (5e-3 / 5e-2,
    /// readout 3e-2). The readout rates are illustrative choices.
    pub fn profile(name: &str) -> Result<Self, SimError> {
        let (g1, g2, ro) = match name {
            "ideal" => (0.0, 0.0, 0.0),
            "low" => (1e-3, 1e-2, 1e-2),
            "high" => (5e-3, 5e-2, 3e-2),
            other => return Err(SimError::UnknownProfile(other.to_string())),
        };
        Ok(Self {
            gate1_error: g1,
            gate2_error: g2,
            readout_error: ro,
            name: Some(name.to_string()),
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, value) in [
            ("gate1_error", self.gate1_error),
            ("gate2_error", self.gate2_error),
            ("readout_error", self.readout_error),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.gate1_error == 0.0 && self.gate2_error == 0.0 && self.readout_error == 0.0
    }
}

/// Probabilities over bitstrings; index bit `width - 1 - q` is qubit `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub width: usize,
    pub probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    /// Bitstring label of outcome `index`, qubit 0 first.
    pub fn label(&self, index: usize) -> String {
        (0..self.width)
            .map(|q| if (index >> (self.width - 1 - q)) & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

fn check_dims(rho: &CMatrix, circuit: &Circuit) -> Result<(), SimError> {
    let expected = 1 << circuit.width;
    if rho.nrows() != expected || rho.ncols() != expected {
        return Err(SimError::DimensionMismatch {
            expected,
            got: rho.nrows(),
        });
    }
    circuit.validate()?;
    Ok(())
}

fn paulis() -> [CMatrix; 4] {
    [identity(2), pauli_x(), pauli_y(), pauli_z()]
}

fn depolarise_1q(rho: &CMatrix, q: usize, width: usize, p: f64) -> CMatrix {
    // (1-p) ρ + p (I/2 ⊗ Tr_q ρ), written as a uniform Pauli twirl
    let mut out = rho * Complex64::new(1.0 - p, 0.0);
    for s in paulis() {
        let e = embed_1q(&s, q, width);
        out += &e * rho * &e * Complex64::new(p / 4.0, 0.0);
    }
    out
}

fn depolarise_2q(rho: &CMatrix, a: usize, b: usize, width: usize, p: f64) -> CMatrix {
    // (1-p) ρ + p (I/4 ⊗ Tr_ab ρ)
    let mut out = rho * Complex64::new(1.0 - p, 0.0);
    let ps = paulis();
    for pa in &ps {
        for pb in &ps {
            let e = embed_1q(pa, a, width) * embed_1q(pb, b, width);
            out += &e * rho * &e * Complex64::new(p / 16.0, 0.0);
        }
    }
    out
}

fn evolve_unchecked(rho: &CMatrix, circuit: &Circuit, noise: &NoiseModel) -> CMatrix {
    let width = circuit.width;
    let mut r = rho.clone();
    for g in &circuit.gates {
        let u = g.unitary(width);
        r = &u * r * u.adjoint();
        match g.name {
            GateName::Cx if noise.gate2_error > 0.0 => {
                r = depolarise_2q(&r, g.qubits[0], g.qubits[1], width, noise.gate2_error);
            }
            GateName::Rz | GateName::Ry if noise.gate1_error > 0.0 => {
                r = depolarise_1q(&r, g.qubits[0], width, noise.gate1_error);
            }
            _ => {}
        }
    }
    r
}

/// Apply the circuit with noise after each gate. Linear in `rho`.
pub fn evolve(rho: &CMatrix, circuit: &Circuit, noise: &NoiseModel) -> Result<CMatrix, SimError> {
    check_dims(rho, circuit)?;
    noise.validate()?;
    Ok(evolve_unchecked(rho, circuit, noise))
}

/// Each bit flips independently with probability `r`.
pub fn apply_readout(values: &[f64], width: usize, r: f64) -> Vec<f64> {
    let mut p = values.to_vec();
    if r == 0.0 {
        return p;
    }
    for q in 0..width {
        let mask = 1 << (width - 1 - q);
        let prev = p.clone();
        for (i, slot) in p.iter_mut().enumerate() {
            *slot = (1.0 - r) * prev[i] + r * prev[i ^ mask];
        }
    }
    p
}

fn diagonal(m: &CMatrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

pub fn outcome_probs(rho: &CMatrix, circuit: &Circuit, noise: &NoiseModel) -> Result<OutcomeDistribution, SimError> {
    let evolved = evolve(rho, circuit, noise)?;
    let probs = apply_readout(&diagonal(&evolved), circuit.width, noise.readout_error)
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    Ok(OutcomeDistribution {
        width: circuit.width,
        probabilities: probs,
    })
}

/// Outcome probabilities together with their derivatives along `d_rho`,
/// all pushed through the same noisy circuit and readout.
pub fn outcome_gradients(
    rho: &CMatrix,
    d_rho: [&CMatrix; 2],
    circuit: &Circuit,
    noise: &NoiseModel,
) -> Result<(OutcomeDistribution, Vec<[f64; 2]>), SimError> {
    let dist = outcome_probs(rho, circuit, noise)?;
    let dx = apply_readout(&diagonal(&evolve(d_rho[0], circuit, noise)?), circuit.width, noise.readout_error);
    let dy = apply_readout(&diagonal(&evolve(d_rho[1], circuit, noise)?), circuit.width, noise.readout_error);
    let dp = dx.into_iter().zip(dy).map(|(a, b)| [a, b]).collect();
    Ok((dist, dp))
}

/// `|0><0|^{⊗ extra} ⊗ rho`: ancilla qubits in front (most significant).
pub fn pad_ancillas(rho: &CMatrix, extra: usize) -> CMatrix {
    let mut zero = CMatrix::zeros(1 << extra, 1 << extra);
    zero[(0, 0)] = Complex64::new(1.0, 0.0);
    kron(&zero, rho)
}

/// Multinomial draw of `shots` outcomes. Deterministic for fixed inputs.
pub fn sample(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_with(&dist.probabilities, shots, &mut rng)
}

pub fn sample_with<R: rand::Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let mut counts = vec![0u64; probs.len()];
    let mut left = shots;
    let mut mass = total;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        let p = p.max(0.0);
        if k + 1 == probs.len() || mass <= p {
            counts[k] = left;
            break;
        }
        let frac = (p / mass).clamp(0.0, 1.0);
        let n = Binomial::new(left, frac).expect("valid binomial").sample(rng);
        counts[k] = n;
        left -= n;
        mass -= p;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;
    use crate::synth::Gate;

    #[test]
    fn readout_convolution() {
        let p = apply_readout(&[0.75, 0.25], 1, 0.1);
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        let p = apply_readout(&[1.0, 0.0, 0.0, 0.0], 2, 0.1);
        assert!((p[3] - 0.01).abs() < 1e-15 && (p[1] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn two_qubit_channel_is_trace_preserving() {
        let rho = diag(&[0.4, 0.3, 0.2, 0.1]);
        let mut c = Circuit::new(2);
        c.push(Gate::cx(0, 1));
        let out = evolve(&rho, &c, &NoiseModel::new(0.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-14);
        // p = 1 replaces the pair with the maximally mixed state
        assert!((out - diag(&[0.25; 4])).norm() < 1e-14);
        let half = evolve(&rho, &c, &NoiseModel::new(0.0, 0.5, 0.0).unwrap()).unwrap();
        let ideal = evolve(&rho, &c, &NoiseModel::ideal()).unwrap();
        assert!((half - (ideal * Complex64::new(0.5, 0.0) + diag(&[0.125; 4]))).norm() < 1e-14);
    }
}
