//! Measurements: POVM representation and validation, classical Fisher
//! information, the analytic single-copy scheme and numerical optimisation of
//! collective measurements against the Nagaoka–Hayashi certificate.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{nagaoka_hayashi_sdp, BoundError};
use crate::linalg::{
    expm_i_hermitian, fix_phase, frobenius, haar_unitary, herm_eig, identity, pauli_x, pauli_y,
    trace_product, CMatrix, CVector,
};
use crate::probe::{check_epsilon, ModelDerivatives, ProbeError, ProbeModel};

pub const PSD_TOL: f64 = 1e-9;
pub const COMPLETENESS_TOL: f64 = 1e-9;
pub const PROJECTIVE_TOL: f64 = 1e-8;

/// Outcomes below this probability with negligible derivative carry no information.
const P_FLOOR: f64 = 1e-12;
const DP_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PovmError {
    #[error("POVM dimension {povm} does not match model dimension {model}")]
    DimensionMismatch { povm: usize, model: usize },

    #[error("POVM is not rank-1 projective")]
    NotProjective,

    #[error("optimiser reached {value:.6} but the certified bound is {target:.6}")]
    TargetNotReached {
        best: Box<Povm>,
        value: f64,
        target: f64,
    },

    #[error("collective optimisation supports 1 to 3 copies, got {0}")]
    UnsupportedCopies(usize),

    #[error("weight must lie in (0, 1), got {0}")]
    InvalidWeight(f64),

    #[error("invalid POVM document: {0}")]
    Format(String),

    #[error(transparent)]
    Probe(#[from] ProbeError),

    #[error(transparent)]
    Bound(#[from] BoundError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub dimension: usize,
    pub copies: usize,
    pub outcomes: Vec<CMatrix>,
    pub labels: Vec<usize>,
    pub projective: bool,
    pub epsilon: f64,
    pub weight_w: f64,
    pub achieved_value: f64,
}

#[derive(Serialize, Deserialize)]
struct PovmDoc {
    dimension: usize,
    copies: usize,
    epsilon: Option<f64>,
    weight_w: Option<f64>,
    achieved_value: Option<f64>,
    outcomes: Vec<Vec<[f64; 2]>>,
}

/// Unset metadata is stored as NaN and written as `null`.
fn known(x: f64) -> Option<f64> {
    (!x.is_nan()).then_some(x)
}

fn copies_of(dimension: usize) -> usize {
    dimension.trailing_zeros() as usize
}

impl Povm {
    /// POVM from explicit outcomes; the projective flag is computed.
    pub fn new(outcomes: Vec<CMatrix>) -> Self {
        let dimension = outcomes.first().map_or(0, |o| o.nrows());
        let projective = is_rank1_projective(&outcomes);
        Self {
            dimension,
            copies: copies_of(dimension),
            labels: (0..outcomes.len()).collect(),
            outcomes,
            projective,
            epsilon: f64::NAN,
            weight_w: f64::NAN,
            achieved_value: f64::NAN,
        }
    }

    /// Rank-1 projective measurement onto the columns of `u`.
    pub fn from_basis(u: &CMatrix) -> Self {
        let outcomes = (0..u.ncols())
            .map(|k| {
                let c = u.column(k);
                c * c.adjoint()
            })
            .collect();
        Self::new(outcomes)
    }

    /// Computational-basis measurement on `m` qubits.
    pub fn computational(m: usize) -> Self {
        Self::from_basis(&identity(1 << m))
    }

    /// Convex mixture `sum_i w_i P_i` with the outcome lists concatenated.
    pub fn mixture(parts: &[(f64, &Povm)]) -> Self {
        let outcomes = parts
            .iter()
            .flat_map(|(w, p)| p.outcomes.iter().map(move |o| o * Complex64::new(*w, 0.0)))
            .collect();
        Self::new(outcomes)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Born probabilities `Tr[Π_k ρ]`.
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.outcomes.iter().map(|o| trace_product(o, rho).re).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = PovmDoc {
            dimension: self.dimension,
            copies: self.copies,
            epsilon: known(self.epsilon),
            weight_w: known(self.weight_w),
            achieved_value: known(self.achieved_value),
            outcomes: self
                .outcomes
                .iter()
                .map(|o| {
                    let d = o.nrows();
                    (0..d * d).map(|k| {
                        let z = o[(k / d, k % d)];
                        [z.re, z.im]
                    })
                    .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("POVM serialisation")
    }

    pub fn from_json(text: &str) -> Result<Self, PovmError> {
        let doc: PovmDoc = serde_json::from_str(text).map_err(|e| PovmError::Format(e.to_string()))?;
        let d = doc.dimension;
        let mut outcomes = Vec::with_capacity(doc.outcomes.len());
        for (k, flat) in doc.outcomes.iter().enumerate() {
            if flat.len() != d * d {
                return Err(PovmError::Format(format!(
                    "outcome {k} has {} entries, expected {}",
                    flat.len(),
                    d * d
                )));
            }
            outcomes.push(CMatrix::from_fn(d, d, |r, c| {
                let [re, im] = flat[r * d + c];
                Complex64::new(re, im)
            }));
        }
        let mut p = Povm::new(outcomes);
        p.dimension = d;
        p.copies = doc.copies;
        p.epsilon = doc.epsilon.unwrap_or(f64::NAN);
        p.weight_w = doc.weight_w.unwrap_or(f64::NAN);
        p.achieved_value = doc.achieved_value.unwrap_or(f64::NAN);
        Ok(p)
    }
}

fn is_rank1_projective(outcomes: &[CMatrix]) -> bool {
    if outcomes.is_empty() {
        return false;
    }
    let d = outcomes[0].nrows();
    if outcomes.len() != d {
        return false;
    }
    outcomes.iter().all(|o| {
        let sq = o * o;
        frobenius(&(&sq - o)) <= PROJECTIVE_TOL && (o.trace().re - 1.0).abs() <= PROJECTIVE_TOL
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DimensionMismatch { outcome: usize, rows: usize, cols: usize },
    NotHermitian { outcome: usize, deviation: f64 },
    NotPsd { outcome: usize, min_eigenvalue: f64 },
    Incomplete { deviation: f64 },
    ProjectiveFlag { flagged: bool, actual: bool },
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    pub projective: bool,
}

pub fn validate(povm: &Povm) -> Result<Validation, Vec<Violation>> {
    let mut v = Vec::new();
    if povm.outcomes.is_empty() {
        return Err(vec![Violation::Empty]);
    }
    let d = povm.dimension;
    let mut sum = CMatrix::zeros(d, d);
    for (k, o) in povm.outcomes.iter().enumerate() {
        if o.nrows() != d || o.ncols() != d {
            v.push(Violation::DimensionMismatch {
                outcome: k,
                rows: o.nrows(),
                cols: o.ncols(),
            });
            continue;
        }
        sum += o;
        match herm_eig(o) {
            Err(crate::linalg::LinalgError::NotHermitian { deviation }) => {
                v.push(Violation::NotHermitian { outcome: k, deviation })
            }
            Err(_) => {}
            Ok(eig) => {
                let min = eig.eigenvalues.min();
                if min < -PSD_TOL {
                    v.push(Violation::NotPsd {
                        outcome: k,
                        min_eigenvalue: min,
                    });
                }
            }
        }
    }
    let deviation = frobenius(&(sum - identity(d)));
    if deviation > COMPLETENESS_TOL {
        v.push(Violation::Incomplete { deviation });
    }
    let actual = is_rank1_projective(&povm.outcomes);
    if actual != povm.projective {
        v.push(Violation::ProjectiveFlag {
            flagged: povm.projective,
            actual,
        });
    }
    if v.is_empty() {
        Ok(Validation { projective: actual })
    } else {
        Err(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub matrix: Matrix2<f64>,
    pub at_point: (f64, f64),
    /// Outcomes with vanishing probability but non-negligible derivative.
    pub degenerate_outcomes: Vec<usize>,
}

impl FisherInfo {
    /// `Tr[W J^-1]` with the unregularised `J`; infinite if `J` is singular.
    pub fn weighted_crb(&self, w: &Matrix2<f64>) -> f64 {
        match self.matrix.try_inverse() {
            Some(inv) if self.matrix.determinant() > 1e-14 * self.matrix.norm_squared() => {
                (w * inv).trace()
            }
            _ => f64::INFINITY,
        }
    }
}

/// Fisher matrix from probabilities and their gradients.
pub fn fisher_from_probabilities(p: &[f64], dp: &[[f64; 2]]) -> (Matrix2<f64>, Vec<usize>) {
    let mut j = Matrix2::zeros();
    let mut degenerate = Vec::new();
    for (k, (&pk, g)) in p.iter().zip(dp).enumerate() {
        if pk < P_FLOOR {
            if g[0].abs().max(g[1].abs()) >= DP_FLOOR {
                degenerate.push(k);
            }
            continue;
        }
        for a in 0..2 {
            for b in 0..2 {
                j[(a, b)] += g[a] * g[b] / pk;
            }
        }
    }
    (j, degenerate)
}

/// Per-shot classical Fisher information at the reference point.
pub fn classical_fisher(povm: &Povm, model: &ProbeModel) -> Result<FisherInfo, PovmError> {
    if povm.dimension != model.dimension() {
        return Err(PovmError::DimensionMismatch {
            povm: povm.dimension,
            model: model.dimension(),
        });
    }
    Ok(fisher_for(povm, &model.derivatives(), model.reference_point))
}

pub fn fisher_for(povm: &Povm, der: &ModelDerivatives, at_point: (f64, f64)) -> FisherInfo {
    let p = povm.probabilities(&der.state);
    let dp: Vec<[f64; 2]> = povm
        .outcomes
        .iter()
        .map(|o| {
            [
                trace_product(o, &der.d_theta_x).re,
                trace_product(o, &der.d_theta_y).re,
            ]
        })
        .collect();
    let (matrix, degenerate_outcomes) = fisher_from_probabilities(&p, &dp);
    FisherInfo {
        matrix,
        at_point,
        degenerate_outcomes,
    }
}

/// Analytic optimal single-copy scheme: half the probes measured in the σ_y
/// basis for θ_x, half in the σ_x basis for θ_y.
#[derive(Debug, Clone)]
pub struct SingleCopyScheme {
    pub povm_x: Povm,
    pub povm_y: Povm,
    pub allocation: [f64; 2],
    /// Per-outcome estimates of θ_x from `povm_x`.
    pub coeffs_x: [f64; 2],
    /// Per-outcome estimates of θ_y from `povm_y`.
    pub coeffs_y: [f64; 2],
    /// Resource-normalised `v_x + v_y`.
    pub variance_sum: f64,
}

/// Eigenbasis of a Pauli, +1 eigenvector first.
pub fn pauli_basis(pauli: &CMatrix) -> CMatrix {
    let eig = herm_eig(pauli).expect("Pauli is Hermitian");
    let mut u = CMatrix::zeros(2, 2);
    u.set_column(0, &eig.eigenvectors.column(1));
    u.set_column(1, &eig.eigenvectors.column(0));
    u
}

pub fn optimal_single_copy(epsilon: f64) -> Result<SingleCopyScheme, PovmError> {
    check_epsilon(epsilon)?;
    let k = 1.0 / (1.0 - epsilon);
    let mut povm_x = Povm::from_basis(&pauli_basis(&pauli_y()));
    let mut povm_y = Povm::from_basis(&pauli_basis(&pauli_x()));
    for p in [&mut povm_x, &mut povm_y] {
        p.epsilon = epsilon;
        p.weight_w = 0.5;
        // each used shot has variance 1/(1-ε)^2 and half the probes go to each
        p.achieved_value = 2.0 * k * k;
    }
    Ok(SingleCopyScheme {
        povm_x,
        povm_y,
        allocation: [0.5, 0.5],
        coeffs_x: [-k, k],
        coeffs_y: [k, -k],
        variance_sum: 4.0 * k * k,
    })
}

/// Orthonormal basis of a rank-1 projective POVM; column `k` spans outcome `k`.
pub fn basis_of(povm: &Povm) -> Result<CMatrix, PovmError> {
    if !is_rank1_projective(&povm.outcomes) {
        return Err(PovmError::NotProjective);
    }
    let d = povm.dimension;
    let mut u = CMatrix::zeros(d, d);
    for (k, o) in povm.outcomes.iter().enumerate() {
        let eig = herm_eig(o).map_err(|_| PovmError::NotProjective)?;
        let mut v: CVector = eig.eigenvectors.column(d - 1).into_owned();
        fix_phase(&mut v);
        u.set_column(k, &v);
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Accepted relative excess over the certified bound.
    pub tolerance: f64,
    /// Certified bound; computed with the SDP if absent.
    pub target: Option<f64>,
    /// For `m = 2`, fall back to a search with one ancilla qubit if the
    /// projective search misses the target.
    pub allow_dilation: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 0,
            max_iters: 5000,
            tolerance: 5e-3,
            target: None,
            allow_dilation: true,
        }
    }
}

/// Weighted CRB of a mixture of rank-1 bases, with its Riemannian gradient.
struct Objective {
    rho: CMatrix,
    d: [CMatrix; 2],
    w: Matrix2<f64>,
    reg: f64,
}

struct Point {
    bases: Vec<CMatrix>,
    /// Logit of the weight of the first basis (two-basis mixtures only).
    logit: f64,
}

impl Point {
    fn mix(&self) -> Vec<f64> {
        if self.bases.len() == 1 {
            vec![1.0]
        } else {
            let c = 1.0 / (1.0 + (-self.logit).exp());
            vec![c, 1.0 - c]
        }
    }
}

/// Tangent vector: one Hermitian generator per basis plus the logit step.
#[derive(Clone)]
struct Tangent {
    gens: Vec<CMatrix>,
    logit: f64,
}

impl Tangent {
    fn dot(&self, other: &Tangent) -> f64 {
        self.gens
            .iter()
            .zip(&other.gens)
            .map(|(a, b)| trace_product(a, b).re)
            .sum::<f64>()
            + self.logit * other.logit
    }

    fn axpy(&self, s: f64, other: &Tangent) -> Tangent {
        let cs = Complex64::new(s, 0.0);
        Tangent {
            gens: self.gens.iter().zip(&other.gens).map(|(a, b)| a + b * cs).collect(),
            logit: self.logit + s * other.logit,
        }
    }

    fn scale(&self, s: f64) -> Tangent {
        let cs = Complex64::new(s, 0.0);
        Tangent {
            gens: self.gens.iter().map(|a| a * cs).collect(),
            logit: self.logit * s,
        }
    }
}

impl Objective {
    fn probabilities(&self, pt: &Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mix = pt.mix();
        let mut p = Vec::new();
        let mut dp = Vec::new();
        for (u, &c) in pt.bases.iter().zip(&mix) {
            for k in 0..u.ncols() {
                let col = u.column(k);
                let q = |m: &CMatrix| c * (col.adjoint() * m * col)[(0, 0)].re;
                p.push(q(&self.rho));
                dp.push([q(&self.d[0]), q(&self.d[1])]);
            }
        }
        (p, dp)
    }

    fn value(&self, pt: &Point) -> f64 {
        let (p, dp) = self.probabilities(pt);
        let (j, _) = fisher_from_probabilities(&p, &dp);
        match (j + Matrix2::identity() * self.reg).try_inverse() {
            Some(inv) => (self.w * inv).trace(),
            None => f64::INFINITY,
        }
    }

    /// Value and gradient with respect to `U <- exp(i t D) U` and the logit.
    fn value_grad(&self, pt: &Point) -> (f64, Tangent) {
        let (p, dp) = self.probabilities(pt);
        let (j, _) = fisher_from_probabilities(&p, &dp);
        let Some(inv) = (j + Matrix2::identity() * self.reg).try_inverse() else {
            let zero = Tangent {
                gens: pt.bases.iter().map(|u| CMatrix::zeros(u.nrows(), u.nrows())).collect(),
                logit: 0.0,
            };
            return (f64::INFINITY, zero);
        };
        let f = (self.w * inv).trace();
        let g = inv * self.w * inv;
        let mix = pt.mix();
        let mut gens = Vec::new();
        let mut dmix = Vec::new();
        let mut idx = 0;
        for (u, &c) in pt.bases.iter().zip(&mix) {
            let d = u.nrows();
            let mut gen = CMatrix::zeros(d, d);
            let mut dc = 0.0;
            for kcol in 0..u.ncols() {
                let (pk, gk) = (p[idx], dp[idx]);
                idx += 1;
                if pk < P_FLOOR {
                    continue;
                }
                let gv = nalgebra::Vector2::new(gk[0], gk[1]);
                let a = gv.dot(&(g * gv)) / (pk * pk);
                let b = -2.0 * (g * gv) / pk;
                let amat = &self.rho * Complex64::new(a, 0.0)
                    + &self.d[0] * Complex64::new(b[0], 0.0)
                    + &self.d[1] * Complex64::new(b[1], 0.0);
                let col = u.column(kcol).into_owned();
                let v = &amat * &col;
                // i c (u v^† - v u^†)
                let comm = &col * v.adjoint() - &v * col.adjoint();
                gen += comm * Complex64::new(0.0, c);
                dc += (col.adjoint() * &v)[(0, 0)].re;
            }
            gens.push(gen);
            dmix.push(dc);
        }
        let logit = if mix.len() == 2 {
            (dmix[0] - dmix[1]) * mix[0] * mix[1]
        } else {
            0.0
        };
        (f, Tangent { gens, logit })
    }

    fn step(&self, pt: &Point, dir: &Tangent, t: f64) -> Point {
        Point {
            bases: pt
                .bases
                .iter()
                .zip(&dir.gens)
                .map(|(u, h)| expm_i_hermitian(h, t).expect("generator is Hermitian") * u)
                .collect(),
            logit: pt.logit + t * dir.logit,
        }
    }
}

/// Riemannian Polak–Ribière conjugate gradient with Armijo backtracking.
fn local_search(obj: &Objective, mut pt: Point, max_iters: usize, stop_at: f64) -> (Point, f64) {
    let (mut f, mut g) = obj.value_grad(&pt);
    let mut dir = g.scale(-1.0);
    let mut t = 0.1;
    let mut quiet = 0;
    for _ in 0..max_iters {
        if f <= stop_at || !f.is_finite() {
            break;
        }
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            dir = g.scale(-1.0);
            slope = -g.dot(&g);
        }
        if slope.abs() < 1e-28 {
            break;
        }
        let mut accepted = None;
        t *= 2.0;
        for _ in 0..60 {
            let cand = obj.step(&pt, &dir, t);
            let fc = obj.value(&cand);
            if fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fnext)) = accepted else { break };
        let improvement = f - fnext;
        pt = next;
        let (f_new, g_new) = obj.value_grad(&pt);
        let beta = (g_new.dot(&g_new) - g_new.dot(&g)) / g.dot(&g).max(1e-300);
        dir = g_new.scale(-1.0).axpy(beta.max(0.0), &dir);
        f = f_new;
        g = g_new;
        if improvement <= 1e-14 * f.abs() {
            quiet += 1;
            if quiet >= 20 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    (pt, f)
}

fn multi_start(obj: &Objective, d: usize, nbases: usize, opts: &OptimizeOptions, stop_at: f64) -> (f64, Point) {
    let exact_obj = Objective {
        reg: 0.0,
        ..clone_objective(obj)
    };
    let mut best: Option<(f64, Point)> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = ChaCha20Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
        let start = Point {
            bases: (0..nbases).map(|_| haar_unitary(d, &mut rng)).collect(),
            logit: 0.0,
        };
        let (pt, _) = local_search(obj, start, opts.max_iters, stop_at);
        let exact = exact_obj.value(&pt);
        if best.as_ref().is_none_or(|(b, _)| exact < *b) {
            best = Some((exact, pt));
        }
        if best.as_ref().is_some_and(|(b, _)| *b <= stop_at) {
            break;
        }
    }
    best.expect("at least one restart")
}

/// Zero-pad an operator into the `|0><0|` ancilla sector of a doubled space.
fn pad_ancilla(a: &CMatrix) -> CMatrix {
    let d = a.nrows();
    let mut out = CMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(a);
    out
}

/// Search for a collective measurement whose weighted CRB
/// `w (J^-1)_xx + (1-w) (J^-1)_yy` reaches the Nagaoka–Hayashi bound.
///
/// For `m >= 2` the search is over rank-1 projective measurements (bases of
/// the `2^m`-dimensional space). Away from balanced weights these can fall
/// short of the bound at `m = 2`; the search then continues over bases of the
/// space with one ancilla qubit prepared in `|0>`, which gives a rank-1 POVM
/// with `2^(m+1)` outcomes. A single qubit basis has two outcomes and cannot
/// identify two parameters, so for `m = 1` the search is over mixtures of two
/// bases, giving a four-outcome POVM.
pub fn optimize_collective(model: &ProbeModel, weight_w: f64, opts: &OptimizeOptions) -> Result<Povm, PovmError> {
    let m = model.copies;
    if !(1..=3).contains(&m) {
        return Err(PovmError::UnsupportedCopies(m));
    }
    if !(weight_w > 0.0 && weight_w < 1.0) {
        return Err(PovmError::InvalidWeight(weight_w));
    }
    let w = Matrix2::new(weight_w, 0.0, 0.0, 1.0 - weight_w);
    let target = match opts.target {
        Some(t) => t,
        None => nagaoka_hayashi_sdp(model, &w)?.value,
    };
    let der = model.derivatives();
    let obj = Objective {
        rho: der.state.clone(),
        d: [der.d_theta_x.clone(), der.d_theta_y.clone()],
        w,
        reg: 1e-9,
    };
    let d = model.dimension();
    let stop_at = target * (1.0 + 1e-7);
    let accept = target * (1.0 + opts.tolerance);

    let (mut value, pt) = multi_start(&obj, d, if m == 1 { 2 } else { 1 }, opts, stop_at);
    let mix = pt.mix();
    let parts: Vec<Povm> = pt.bases.iter().map(Povm::from_basis).collect();
    let mut povm = if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        let refs: Vec<(f64, &Povm)> = mix.iter().cloned().zip(parts.iter()).collect();
        Povm::mixture(&refs)
    };

    if value > accept && m == 2 && opts.allow_dilation {
        let dilated = Objective {
            rho: pad_ancilla(&obj.rho),
            d: [pad_ancilla(&obj.d[0]), pad_ancilla(&obj.d[1])],
            w,
            reg: obj.reg,
        };
        let (v2, pt2) = multi_start(&dilated, 2 * d, 1, opts, stop_at);
        if v2 < value {
            value = v2;
            let u = &pt2.bases[0];
            let outcomes = (0..2 * d)
                .map(|k| {
                    let v = u.view((0, k), (d, 1)).into_owned();
                    &v * v.adjoint()
                })
                .collect();
            povm = Povm::new(outcomes);
        }
    }

    povm.copies = m;
    povm.epsilon = model.epsilon;
    povm.weight_w = weight_w;
    povm.achieved_value = value;

    if value > accept {
        return Err(PovmError::TargetNotReached {
            best: Box::new(povm),
            value,
            target,
        });
    }
    Ok(povm)
}

/// Unitary on the space with one ancilla qubit (most significant, in `|0>`)
/// whose computational-basis readout realises a rank-1 POVM with `2d`
/// outcomes. Projective POVMs are returned as their basis.
pub fn naimark_unitary(povm: &Povm) -> Result<CMatrix, PovmError> {
    if povm.projective {
        return basis_of(povm);
    }
    let d = povm.dimension;
    let n = povm.len();
    if n != 2 * d {
        return Err(PovmError::NotProjective);
    }
    let mut u = CMatrix::zeros(n, n);
    for (k, o) in povm.outcomes.iter().enumerate() {
        let eig = herm_eig(o).map_err(|_| PovmError::NotProjective)?;
        let lmax = eig.eigenvalues[d - 1];
        if d > 1 && eig.eigenvalues[d - 2] > PROJECTIVE_TOL {
            return Err(PovmError::NotProjective);
        }
        let mut v: CVector = eig.eigenvectors.column(d - 1).into_owned();
        fix_phase(&mut v);
        let v = v * Complex64::new(lmax.max(0.0).sqrt(), 0.0);
        u.view_mut((0, k), (d, 1)).copy_from(&v);
    }
    // Complete the orthonormal rows with projected standard basis vectors.
    let mut row = d;
    for j in 0..n {
        if row == n {
            break;
        }
        let mut e = nalgebra::RowDVector::<Complex64>::zeros(n);
        e[j] = Complex64::new(1.0, 0.0);
        for r in 0..row {
            let rr = u.row(r).into_owned();
            let c = (e.clone() * rr.adjoint())[(0, 0)];
            e -= rr * c;
        }
        let norm = e.norm();
        if norm > 1e-6 {
            u.set_row(row, &(e / Complex64::new(norm, 0.0)));
            row += 1;
        }
    }
    // nearest unitary (polar factor)
    Ok(crate::linalg::polar_unitary(&u))
}

fn clone_objective(o: &Objective) -> Objective {
    Objective {
        rho: o.rho.clone(),
        d: o.d.clone(),
        w: o.w,
        reg: o.reg,
    }
}

/// Per-outcome estimator coefficients for a locally unbiased linear estimator
/// built from Fisher information: `ξ_k = J^-1 ∂p_k / p_k`.
pub fn score_coefficients(p: &[f64], dp: &[[f64; 2]], j_inv: &Matrix2<f64>) -> Vec<[f64; 2]> {
    p.iter()
        .zip(dp)
        .map(|(&pk, g)| {
            if pk < P_FLOOR {
                return [0.0, 0.0];
            }
            let v = j_inv * nalgebra::Vector2::new(g[0], g[1]) / pk;
            [v[0], v[1]]
        })
        .collect()
}

/// Random POVM with `n` outcomes from Gram-normalised Ginibre operators.
pub fn random_povm<R: rand::Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Povm {
    use rand_distr::StandardNormal;
    let raw: Vec<CMatrix> = (0..n)
        .map(|_| {
            let g = CMatrix::from_fn(d, d, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            g.adjoint() * g
        })
        .collect();
    let sum = raw.iter().fold(CMatrix::zeros(d, d), |acc, x| acc + x);
    let eig = herm_eig(&sum).expect("Hermitian sum");
    let s_inv_half = eig.map_spectrum(|x| 1.0 / x.sqrt());
    let outcomes = raw
        .iter()
        .map(|a| {
            let o = &s_inv_half * a * &s_inv_half;
            (&o + o.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    Povm::new(outcomes)
}

/// Probability vector gradient helper exposed for estimators.
pub fn probability_gradients(povm: &Povm, der: &ModelDerivatives) -> (Vec<f64>, Vec<[f64; 2]>) {
    let p = povm.probabilities(&der.state);
    let dp = povm
        .outcomes
        .iter()
        .map(|o| {
            [
                trace_product(o, &der.d_theta_x).re,
                trace_product(o, &der.d_theta_y).re,
            ]
        })
        .collect();
    (p, dp)
}
