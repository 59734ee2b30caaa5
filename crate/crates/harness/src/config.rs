//! Experiment configuration. TOML with dotted keys for nesting
//! (`noise.gate2_error`, `mitigation.points`); unknown keys are rejected so a
//! typo cannot silently change a reproduction.

use std::path::{Path, PathBuf};

use metrology_core::infer::Scheme;
use metrology_core::sim::NoiseModel;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub theta_true: (f64, f64),
    /// Only used by `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<ThetaGrid>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Defaults to 512, or 341 for the three-copy scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_circuit: Option<u64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default = "default_weight")]
    pub weight_w: f64,
    #[serde(default)]
    pub estimator: EstimatorMode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Where optimised POVMs and their circuits are stored between runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn default_epsilon() -> f64 {
    0.5
}
fn default_scheme() -> Scheme {
    Scheme::Two
}
fn default_runs() -> usize {
    400
}
fn default_weight() -> f64 {
    0.5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            theta_true: (0.0, 0.0),
            theta_grid: None,
            scheme: default_scheme(),
            shots_per_circuit: None,
            runs: default_runs(),
            seed: 0,
            noise: NoiseSpec::default(),
            mitigation: MitigationConfig::default(),
            weight_w: default_weight(),
            estimator: EstimatorMode::default(),
            optimizer: OptimizerConfig::default(),
            cache_dir: None,
        }
    }
}

/// A named profile (`noise = "low"`) or explicit rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Profile(String),
    Model(NoiseModel),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Profile("ideal".into())
    }
}

impl NoiseSpec {
    pub fn resolve(&self) -> Result<NoiseModel, HarnessError> {
        let model = match self {
            NoiseSpec::Profile(name) => NoiseModel::profile(name)?,
            NoiseSpec::Model(m) => m.clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitigationKind {
    /// `θ̂ + c`.
    #[default]
    Offset,
    /// `a θ̂ + b`; biases the estimator, kept for comparison.
    Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_range")]
    pub range: f64,
    #[serde(default = "default_recalib")]
    pub recalib_every: usize,
    #[serde(default)]
    pub model: MitigationKind,
}

fn yes() -> bool {
    true
}
fn default_points() -> usize {
    30
}
fn default_range() -> f64 {
    0.2
}
fn default_recalib() -> usize {
    40
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            points: default_points(),
            range: default_range(),
            recalib_every: default_recalib(),
            model: MitigationKind::Offset,
        }
    }
}

/// Which outcome statistics the linear estimator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Noiseless circuit: the estimator a lab would derive from the ideal
    /// measurement. Noise then shows up as bias, which mitigation corrects.
    #[default]
    Ideal,
    /// The configured noisy channel, so the estimator stays locally unbiased.
    NoiseAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_restarts() -> usize {
    20
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// `θ = (t, t)`.
    #[default]
    Both,
    /// `θ = (t, θ_y)` with `θ_y` from `theta_true`.
    X,
    Y,
    /// Every pair `(t_i, t_j)`: `points²` angles covering the square.
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    #[serde(default = "neg_range")]
    pub from: f64,
    #[serde(default = "default_range")]
    pub to: f64,
    #[serde(default = "default_grid_points")]
    pub points: usize,
    #[serde(default)]
    pub axis: Axis,
}

fn neg_range() -> f64 {
    -0.2
}
fn default_grid_points() -> usize {
    9
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self {
            from: neg_range(),
            to: default_range(),
            points: default_grid_points(),
            axis: Axis::Both,
        }
    }
}

impl ThetaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.from];
        }
        let span = self.to - self.from;
        let last = (self.points - 1) as f64;
        (0..self.points).map(|i| self.from + span * i as f64 / last).collect()
    }

    pub fn thetas(&self, base: (f64, f64)) -> Vec<(f64, f64)> {
        let v = self.values();
        match self.axis {
            Axis::Both => v.iter().map(|&t| (t, t)).collect(),
            Axis::X => v.iter().map(|&t| (t, base.1)).collect(),
            Axis::Y => v.iter().map(|&t| (base.0, t)).collect(),
            Axis::Square => v.iter().flat_map(|&x| v.iter().map(move |&y| (x, y))).collect(),
        }
    }
}

/// Largest |θ| the linear estimators are meant for.
pub const THETA_LIMIT: f64 = 0.2;

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn shots(&self) -> u64 {
        self.shots_per_circuit.unwrap_or_else(|| self.scheme.default_shots())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(invalid(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.weight_w > 0.0 && self.weight_w < 1.0) {
            return Err(invalid(format!("weight_w must lie in (0, 1), got {}", self.weight_w)));
        }
        if self.runs < 2 {
            return Err(invalid("runs must be at least 2"));
        }
        if self.shots() == 0 {
            return Err(invalid("shots_per_circuit must be positive"));
        }
        let (x, y) = self.theta_true;
        if !(x.abs() <= THETA_LIMIT && y.abs() <= THETA_LIMIT) {
            return Err(invalid(format!("theta_true must lie within ±{THETA_LIMIT} rad")));
        }
        if let Some(g) = &self.theta_grid {
            if g.points == 0 || !(g.from.abs() <= THETA_LIMIT && g.to.abs() <= THETA_LIMIT) {
                return Err(invalid(format!("theta_grid must have points within ±{THETA_LIMIT} rad")));
            }
        }
        let m = &self.mitigation;
        if m.enabled && (m.points < 2 || m.range <= 0.0 || m.recalib_every == 0) {
            return Err(invalid("mitigation needs points ≥ 2, range > 0 and recalib_every ≥ 1"));
        }
        if self.optimizer.restarts == 0 {
            return Err(invalid("optimizer.restarts must be positive"));
        }
        self.noise.resolve().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}
