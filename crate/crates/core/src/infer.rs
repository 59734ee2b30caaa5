//! Estimation from outcome counts: locally unbiased linear estimators,
//! additive-offset error mitigation, MSE aggregation, bootstrap error bars and
//! a Kolmogorov–Smirnov check of per-run errors against a scaled χ².

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Probabilities below this carry no usable information for the estimator.
const P_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferError {
    #[error("Fisher information is singular (det {0:.3e})")]
    SingularFisher(f64),

    #[error("no counts")]
    EmptyCounts,

    #[error("counts have {got} outcomes, estimator expects {expected}")]
    CountsMismatch { expected: usize, got: usize },

    #[error("no records")]
    EmptyInput,

    #[error("records mix different true angles or schemes")]
    MixedRecords,

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Single,
    Two,
    Three,
}

impl Scheme {
    pub fn copies(self) -> usize {
        match self {
            Scheme::Single => 1,
            Scheme::Two => 2,
            Scheme::Three => 3,
        }
    }

    /// Shots per circuit under the equal-resource convention.
    pub fn default_shots(self) -> u64 {
        match self {
            Scheme::Three => 341,
            _ => 512,
        }
    }

    /// Circuits per run: the single-copy scheme splits probes over two bases.
    pub fn circuits(self) -> u64 {
        match self {
            Scheme::Single => 2,
            _ => 1,
        }
    }

    pub fn copies_consumed(self, shots_per_circuit: u64) -> u64 {
        shots_per_circuit * self.circuits() * self.copies() as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Single => "single",
            Scheme::Two => "two",
            Scheme::Three => "three",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" => Some(Scheme::Single),
            "two" => Some(Scheme::Two),
            "three" => Some(Scheme::Three),
            _ => None,
        }
    }
}

/// Which parameters an estimator reports. A single-qubit basis only informs
/// one of them; the other estimate is reported as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Both,
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuiltAt {
    pub theta: (f64, f64),
    pub epsilon: f64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimator {
    /// `(ξ_x,k, ξ_y,k)` per outcome.
    pub coefficients: Vec<[f64; 2]>,
    /// Per-shot Fisher matrix the estimator was built from.
    pub fisher: Matrix2<f64>,
    /// Per-shot covariance of the estimates at the build point.
    pub covariance: Matrix2<f64>,
    pub target: Target,
    pub built_at: BuiltAt,
}

/// `ξ_k = J^-1 ∂p_k / p_k`, the efficient locally unbiased linear estimator.
pub fn build_estimator(p: &[f64], dp: &[[f64; 2]], target: Target, built_at: BuiltAt) -> Result<LinearEstimator, InferError> {
    let mut j = Matrix2::zeros();
    for (&pk, g) in p.iter().zip(dp) {
        if pk < P_FLOOR {
            continue;
        }
        for a in 0..2 {
            for b in 0..2 {
                j[(a, b)] += g[a] * g[b] / pk;
            }
        }
    }
    let covariance = match target {
        Target::Both => {
            let det = j.determinant();
            if det < 1e-12 {
                return Err(InferError::SingularFisher(det));
            }
            j.try_inverse().ok_or(InferError::SingularFisher(det))?
        }
        Target::X | Target::Y => {
            let i = if target == Target::X { 0 } else { 1 };
            if j[(i, i)] < 1e-12 {
                return Err(InferError::SingularFisher(j[(i, i)]));
            }
            let mut c = Matrix2::zeros();
            c[(i, i)] = 1.0 / j[(i, i)];
            c
        }
    };
    let coefficients = p
        .iter()
        .zip(dp)
        .map(|(&pk, g)| {
            if pk < P_FLOOR {
                return [0.0, 0.0];
            }
            let v = covariance * Vector2::new(g[0], g[1]) / pk;
            [v[0], v[1]]
        })
        .collect();
    Ok(LinearEstimator {
        coefficients,
        fisher: j,
        covariance,
        target,
        built_at,
    })
}

impl LinearEstimator {
    /// `θ̂_j = Σ_k (n_k / N) ξ_j,k`.
    pub fn estimate(&self, counts: &[u64]) -> Result<(f64, f64), InferError> {
        estimate(counts, self)
    }
}

pub fn estimate(counts: &[u64], est: &LinearEstimator) -> Result<(f64, f64), InferError> {
    if counts.len() != est.coefficients.len() {
        return Err(InferError::CountsMismatch {
            expected: est.coefficients.len(),
            got: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(InferError::EmptyCounts);
    }
    let (mut x, mut y) = (0.0, 0.0);
    for (&n, xi) in counts.iter().zip(&est.coefficients) {
        let f = n as f64 / total as f64;
        x += f * xi[0];
        y += f * xi[1];
    }
    Ok((x, y))
}

/// Additive correction `θ̂ = θ̂_noisy + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MitigationModel {
    pub c_x: f64,
    pub c_y: f64,
    pub calib_points: usize,
    pub calib_range: f64,
    /// Run index at which the model was fitted.
    pub fitted_at: usize,
}

impl MitigationModel {
    pub fn identity() -> Self {
        Self {
            c_x: 0.0,
            c_y: 0.0,
            calib_points: 0,
            calib_range: 0.0,
            fitted_at: 0,
        }
    }

    pub fn apply(&self, theta_hat: (f64, f64)) -> (f64, f64) {
        (theta_hat.0 + self.c_x, theta_hat.1 + self.c_y)
    }
}

/// Calibration angles: `points` pairs drawn uniformly from `[-range, range]^2`.
pub fn calibration_angles(points: usize, range: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..points)
        .map(|_| (rng.random_range(-range..=range), rng.random_range(-range..=range)))
        .collect()
}

/// Fit `c_j = mean(θ_true - θ̂_noisy)` over known calibration angles.
pub fn calibrate<F>(mut backend: F, points: usize, range: f64, seed: u64) -> MitigationModel
where
    F: FnMut(usize, (f64, f64)) -> (f64, f64),
{
    let angles = calibration_angles(points, range, seed);
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, &theta) in angles.iter().enumerate() {
        let est = backend(i, theta);
        sx += theta.0 - est.0;
        sy += theta.1 - est.1;
    }
    let n = points.max(1) as f64;
    MitigationModel {
        c_x: sx / n,
        c_y: sy / n,
        calib_points: points,
        calib_range: range,
        fitted_at: 0,
    }
}

/// Rescale-plus-shift correction `θ̂ = a θ̂_noisy + b` per parameter, fitted by
/// least squares. Kept only to reproduce how a richer model behaves; the
/// additive model is the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMitigation {
    pub slope: (f64, f64),
    pub intercept: (f64, f64),
    pub calib_points: usize,
    pub calib_range: f64,
    pub fitted_at: usize,
}

impl AffineMitigation {
    pub fn apply(&self, theta_hat: (f64, f64)) -> (f64, f64) {
        (
            self.slope.0 * theta_hat.0 + self.intercept.0,
            self.slope.1 * theta_hat.1 + self.intercept.1,
        )
    }
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 1.0 };
    (a, my - a * mx)
}

/// Regress true angles on noisy estimates over the same calibration set as
/// [`calibrate`].
pub fn calibrate_affine<F>(mut backend: F, points: usize, range: f64, seed: u64) -> AffineMitigation
where
    F: FnMut(usize, (f64, f64)) -> (f64, f64),
{
    let angles = calibration_angles(points, range, seed);
    let est: Vec<(f64, f64)> = angles.iter().enumerate().map(|(i, &t)| backend(i, t)).collect();
    let col = |v: &[(f64, f64)], j: usize| -> Vec<f64> { v.iter().map(|p| if j == 0 { p.0 } else { p.1 }).collect() };
    let (ax, bx) = fit_line(&col(&est, 0), &col(&angles, 0));
    let (ay, by) = fit_line(&col(&est, 1), &col(&angles, 1));
    AffineMitigation {
        slope: (ax, ay),
        intercept: (bx, by),
        calib_points: points,
        calib_range: range,
        fitted_at: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub theta_true: (f64, f64),
    pub theta_hat_raw: (f64, f64),
    pub theta_hat_mitigated: Option<(f64, f64)>,
    pub scheme: Scheme,
    pub shots_used: u64,
    pub copies_consumed: u64,
}

impl RunRecord {
    pub fn squared_error(&self, mitigated: bool) -> f64 {
        let hat = if mitigated {
            self.theta_hat_mitigated.unwrap_or(self.theta_hat_raw)
        } else {
            self.theta_hat_raw
        };
        (hat.0 - self.theta_true.0).powi(2) + (hat.1 - self.theta_true.1).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub mse: f64,
    pub scaled_mse: f64,
}

/// Mean over runs of the summed squared error of both parameters, and the same
/// scaled by copies consumed per run.
pub fn mse(records: &[RunRecord]) -> Result<MseSummary, InferError> {
    mse_of(records, false)
}

pub fn mse_of(records: &[RunRecord], mitigated: bool) -> Result<MseSummary, InferError> {
    let first = records.first().ok_or(InferError::EmptyInput)?;
    if records
        .iter()
        .any(|r| r.theta_true != first.theta_true || r.scheme != first.scheme)
    {
        return Err(InferError::MixedRecords);
    }
    let m = records.iter().map(|r| r.squared_error(mitigated)).sum::<f64>() / records.len() as f64;
    Ok(MseSummary {
        mse: m,
        scaled_mse: m * first.copies_consumed as f64,
    })
}

/// Standard deviation of the mean over `resamples` bootstrap resamples.
pub fn bootstrap_std(values: &[f64], resamples: usize, seed: u64) -> Result<f64, InferError> {
    let n = values.len();
    bootstrap_statistic(n, resamples, seed, |idx| idx.iter().map(|&i| values[i]).sum::<f64>() / n as f64)
}

/// Bootstrap standard deviation of `stat`, which sees one resample of the
/// indices `0..n` per call.
pub fn bootstrap_statistic<F>(n: usize, resamples: usize, seed: u64, mut stat: F) -> Result<f64, InferError>
where
    F: FnMut(&[usize]) -> f64,
{
    if n < 2 {
        return Err(InferError::TooFewValues { needed: 2, got: n });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    let stats: Vec<f64> = (0..resamples.max(2))
        .map(|_| {
            for slot in idx.iter_mut() {
                *slot = rng.random_range(0..n);
            }
            stat(&idx)
        })
        .collect();
    let mu = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChisqCheck {
    pub ks_statistic: f64,
    pub p_value: f64,
    /// Moment-fitted scale `s` in `values ~ s χ²(dof)`.
    pub scale: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov survival function with the usual small-sample correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `values` against `s χ²(dof)` with `s = mean / dof`; passes at p ≥ 0.01.
pub fn chisq_check(values: &[f64], dof: f64) -> Result<ChisqCheck, InferError> {
    if values.len() < 100 {
        return Err(InferError::TooFewValues {
            needed: 100,
            got: values.len(),
        });
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let scale = mean / dof;
    let dist = ChiSquared::new(dof).expect("positive dof");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = if scale > 0.0 { dist.cdf(x / scale) } else { 1.0 };
        d = d.max(f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f);
    }
    let p_value = ks_p_value(d, n);
    Ok(ChisqCheck {
        ks_statistic: d,
        p_value,
        scale,
        pass: p_value >= 0.01,
    })
}
