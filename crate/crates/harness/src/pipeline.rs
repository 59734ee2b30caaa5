//! probe → measurement → circuit → noisy simulation → estimates.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use metrology_core::infer::{
    build_estimator, calibrate, calibrate_affine, AffineMitigation, BuiltAt, LinearEstimator, MitigationModel, RunRecord,
    Scheme, Target,
};
use metrology_core::linalg::{pauli_x, pauli_y};
use metrology_core::povm::{naimark_unitary, optimize_collective, pauli_basis, OptimizeOptions, Povm};
use metrology_core::probe::ProbeModel;
use metrology_core::sim::{outcome_gradients, outcome_probs, pad_ancillas, sample_with, NoiseModel};
use metrology_core::synth::{basis_to_unitary, compile, Circuit};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EstimatorMode, ExperimentConfig, MitigationKind};
use crate::error::HarnessError;
use crate::seeds::{derive, Purpose};

/// One measured circuit and the estimator reading its outcomes.
#[derive(Debug, Clone)]
pub struct Arm {
    pub circuit: Circuit,
    /// Ancilla qubits in `|0>` ahead of the probe copies.
    pub ancillas: usize,
    pub estimator: LinearEstimator,
}

#[derive(Debug, Clone)]
pub struct SchemeSetup {
    pub scheme: Scheme,
    pub model: ProbeModel,
    /// The collective measurement, absent for the single-copy scheme.
    pub povm: Option<Povm>,
    pub arms: Vec<Arm>,
}

type CacheKey = (usize, u64, u64, u64, usize);

fn memory_cache() -> &'static Mutex<HashMap<CacheKey, (Povm, Circuit)>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, (Povm, Circuit)>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cache_stem(m: usize, eps: f64, w: f64, seed: u64) -> String {
    format!("m{m}_eps{eps:.6}_w{w:.6}_seed{seed}")
}

fn read_cached(dir: &Path, stem: &str) -> Option<(Povm, Circuit)> {
    let povm = std::fs::read_to_string(dir.join(format!("povm_{stem}.json"))).ok()?;
    let circ = std::fs::read_to_string(dir.join(format!("circuit_{stem}.json"))).ok()?;
    Some((Povm::from_json(&povm).ok()?, Circuit::from_json(&circ).ok()?))
}

fn write_cached(dir: &Path, stem: &str, povm: &Povm, circ: &Circuit) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for (name, text) in [("povm", povm.to_json()), ("circuit", circ.to_json())] {
        let path = dir.join(format!("{name}_{stem}.json"));
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

/// Circuit whose computational-basis readout realises `povm`.
pub fn povm_circuit(povm: &Povm) -> Result<Circuit, HarnessError> {
    let basis = naimark_unitary(povm)?;
    Ok(compile(&basis_to_unitary(&basis)?)?)
}

/// Optimised collective measurement and its circuit, memoised in-process and
/// optionally on disk.
pub fn collective_measurement(
    model: &ProbeModel,
    weight_w: f64,
    opts: &OptimizeOptions,
    cache_dir: Option<&Path>,
) -> Result<(Povm, Circuit), HarnessError> {
    let key = (
        model.copies,
        model.epsilon.to_bits(),
        weight_w.to_bits(),
        opts.seed,
        opts.restarts,
    );
    if let Some(hit) = memory_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let stem = cache_stem(model.copies, model.epsilon, weight_w, opts.seed);
    let found = cache_dir.and_then(|d| read_cached(d, &stem));
    let pair = match found {
        Some(pair) => pair,
        None => {
            let povm = optimize_collective(model, weight_w, opts)?;
            let circ = povm_circuit(&povm)?;
            if let Some(dir) = cache_dir {
                write_cached(dir, &stem, &povm, &circ)?;
            }
            (povm, circ)
        }
    };
    memory_cache().lock().unwrap().insert(key, pair.clone());
    Ok(pair)
}

impl SchemeSetup {
    pub fn build(cfg: &ExperimentConfig, noise: &NoiseModel) -> Result<Self, HarnessError> {
        let scheme = cfg.scheme;
        let model = ProbeModel::new(cfg.epsilon, scheme.copies())?;
        let built_noise = match cfg.estimator {
            EstimatorMode::Ideal => NoiseModel::ideal(),
            EstimatorMode::NoiseAware => noise.clone(),
        };
        let built_at = BuiltAt {
            theta: (0.0, 0.0),
            epsilon: cfg.epsilon,
            scheme,
        };
        let mut circuits = Vec::new();
        let mut povm = None;
        match scheme {
            Scheme::Single => {
                // σ_y readout informs θ_x, σ_x readout informs θ_y
                for (pauli, target) in [(pauli_y(), Target::X), (pauli_x(), Target::Y)] {
                    circuits.push((compile(&basis_to_unitary(&pauli_basis(&pauli))?)?, target));
                }
            }
            Scheme::Two | Scheme::Three => {
                let opts = OptimizeOptions {
                    restarts: cfg.optimizer.restarts,
                    seed: cfg.optimizer.seed,
                    ..OptimizeOptions::default()
                };
                let (p, circ) = collective_measurement(&model, cfg.weight_w, &opts, cfg.cache_dir.as_deref())?;
                povm = Some(p);
                circuits.push((circ, Target::Both));
            }
        }
        let der = model.derivatives();
        let arms = circuits
            .into_iter()
            .map(|(circuit, target)| {
                let ancillas = circuit.width - model.copies;
                let pad = |m| pad_ancillas(m, ancillas);
                let (dist, dp) = outcome_gradients(
                    &pad(&der.state),
                    [&pad(&der.d_theta_x), &pad(&der.d_theta_y)],
                    &circuit,
                    &built_noise,
                )?;
                let estimator = build_estimator(&dist.probabilities, &dp, target, built_at)?;
                Ok(Arm {
                    circuit,
                    ancillas,
                    estimator,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(Self {
            scheme,
            model,
            povm,
            arms,
        })
    }

    /// Outcome distribution of every arm at `theta`.
    pub fn distributions(&self, theta: (f64, f64), noise: &NoiseModel) -> Result<Vec<Vec<f64>>, HarnessError> {
        let rho = self.model.state_at(theta.0, theta.1);
        self.arms
            .iter()
            .map(|arm| Ok(outcome_probs(&pad_ancillas(&rho, arm.ancillas), &arm.circuit, noise)?.probabilities))
            .collect()
    }

    /// Sample `shots` per arm and combine the arms' estimates.
    pub fn estimate<R: rand::Rng + ?Sized>(
        &self,
        dists: &[Vec<f64>],
        shots: u64,
        rng: &mut R,
    ) -> Result<(f64, f64), HarnessError> {
        let mut out = (0.0, 0.0);
        for (arm, p) in self.arms.iter().zip(dists) {
            let e = arm.estimator.estimate(&sample_with(p, shots, rng))?;
            match arm.estimator.target {
                Target::Both => out = e,
                Target::X => out.0 = e.0,
                Target::Y => out.1 = e.1,
            }
        }
        Ok(out)
    }

    pub fn total_cx(&self) -> usize {
        self.arms.iter().map(|a| a.circuit.cx_count()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Correction {
    Offset(MitigationModel),
    Affine(AffineMitigation),
}

impl Correction {
    pub fn apply(&self, theta_hat: (f64, f64)) -> (f64, f64) {
        match self {
            Correction::Offset(m) => m.apply(theta_hat),
            Correction::Affine(m) => m.apply(theta_hat),
        }
    }
}

/// A configured experiment with its measurement and calibration fixed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub noise: NoiseModel,
    pub setup: SchemeSetup,
    /// One correction per block of `recalib_every` runs; empty when off.
    pub corrections: Vec<Correction>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let noise = config.noise.resolve()?;
        let setup = SchemeSetup::build(config, &noise)?;
        Self::calibrated(config.clone(), noise, setup)
    }

    /// Same measurement, new seed: fresh shots and fresh calibrations.
    pub fn reseeded(&self, seed: u64) -> Result<Self, HarnessError> {
        let mut config = self.config.clone();
        config.seed = seed;
        Self::calibrated(config, self.noise.clone(), self.setup.clone())
    }

    fn calibrated(config: ExperimentConfig, noise: NoiseModel, setup: SchemeSetup) -> Result<Self, HarnessError> {
        let mut exp = Self {
            config,
            noise,
            setup,
            corrections: Vec::new(),
        };
        let config = &exp.config;
        if config.mitigation.enabled {
            let every = config.mitigation.recalib_every;
            let blocks = config.runs.div_ceil(every);
            let corrections = (0..blocks)
                .into_par_iter()
                .map(|b| exp.calibrate_block(b, b * every))
                .collect::<Result<_, _>>()?;
            exp.corrections = corrections;
        }
        Ok(exp)
    }

    fn calibrate_block(&self, block: usize, fitted_at: usize) -> Result<Correction, HarnessError> {
        let cfg = &self.config;
        let m = &cfg.mitigation;
        let scheme = cfg.scheme;
        let angle_seed = derive(cfg.seed, block as u64, scheme, Purpose::CalibrationAngles);
        let angles = metrology_core::infer::calibration_angles(m.points, m.range, angle_seed);
        let dists = angles
            .iter()
            .map(|&t| self.setup.distributions(t, &self.noise))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rng = ChaCha20Rng::seed_from_u64(derive(cfg.seed, block as u64, scheme, Purpose::CalibrationShots));
        let shots = cfg.shots();
        let mut failure = None;
        let backend = |i: usize, _| match self.setup.estimate(&dists[i], shots, &mut rng) {
            Ok(e) => e,
            Err(e) => {
                failure.get_or_insert(e);
                (0.0, 0.0)
            }
        };
        let correction = match m.model {
            MitigationKind::Offset => {
                let mut c = calibrate(backend, m.points, m.range, angle_seed);
                c.fitted_at = fitted_at;
                Correction::Offset(c)
            }
            MitigationKind::Affine => {
                let mut c = calibrate_affine(backend, m.points, m.range, angle_seed);
                c.fitted_at = fitted_at;
                Correction::Affine(c)
            }
        };
        match failure {
            Some(e) => Err(e),
            None => Ok(correction),
        }
    }

    /// All runs at one true angle, sorted by run index.
    pub fn run_at(&self, theta: (f64, f64)) -> Result<Vec<RunRecord>, HarnessError> {
        let cfg = &self.config;
        let dists = self.setup.distributions(theta, &self.noise)?;
        let shots = cfg.shots();
        let copies = cfg.scheme.copies_consumed(shots);
        let every = cfg.mitigation.recalib_every.max(1);
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha20Rng::seed_from_u64(derive(cfg.seed, r as u64, cfg.scheme, Purpose::Shots));
                let raw = self.setup.estimate(&dists, shots, &mut rng)?;
                Ok(RunRecord {
                    run_index: r,
                    theta_true: theta,
                    theta_hat_raw: raw,
                    theta_hat_mitigated: self.corrections.get(r / every).map(|c| c.apply(raw)),
                    scheme: cfg.scheme,
                    shots_used: shots,
                    copies_consumed: copies,
                })
            })
            .collect()
    }
}
