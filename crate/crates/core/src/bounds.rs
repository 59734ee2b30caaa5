//! Precision bounds for the two-parameter rotation model: closed forms, the
//! SLD Fisher matrix, the Holevo and Nagaoka–Hayashi SDP bounds, the
//! Lu–Wang margin and weighted trade-off curves.
//!
//! The SDPs are posed on a list of [`ModelBlock`]s. The full formulation is a
//! single block holding the `2^m`-dimensional state. Because the `m`-copy state
//! and its derivatives are permutation invariant, the optimum can also be
//! searched among permutation-invariant observables, which decompose into one
//! block per total spin `J` with multiplicity `n_J`. That symmetric
//! formulation is what makes `m = 7` tractable.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{herm_eig, trace_product, CMatrix, LinalgError};
use crate::probe::{check_epsilon, ProbeError, ProbeModel, MAX_COPIES};
use crate::sdp::{SdpError, SdpOptions, SdpProblem, Var};

/// Largest `m` handled without [`BoundOptions::allow_large`].
pub const DEFAULT_MAX_COPIES: usize = 3;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error(transparent)]
    Probe(#[from] ProbeError),

    #[error("SDP solver did not converge: {0}")]
    SolverNotConverged(#[from] SdpError),

    #[error("weight matrix is not symmetric positive semidefinite")]
    InvalidWeight,

    #[error("weights must lie strictly inside (0, 1), got {0}")]
    InvalidWeightGrid(f64),

    #[error("state is singular and a derivative has support outside it")]
    SingularState,

    #[error("{0} copies needs allow_large (default limit is {DEFAULT_MAX_COPIES})")]
    LargeCopiesDisabled(usize),

    #[error("dimension too large: {0} copies")]
    DimensionTooLarge(usize),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Sld,
    NagaokaHayashi,
    Holevo,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub n1: f64,
    pub n2: f64,
    pub holevo: f64,
    pub sld_sum: f64,
}

pub fn closed_form(epsilon: f64) -> Result<ClosedForm, BoundError> {
    check_epsilon(epsilon)?;
    let s = (1.0 - epsilon).powi(2);
    Ok(ClosedForm {
        n1: 4.0 / s,
        n2: (4.0 - 2.0 * epsilon + epsilon * epsilon) / (2.0 * s),
        holevo: (4.0 - 2.0 * epsilon) / s,
        sld_sum: 2.0 / s,
    })
}

/// `1/v_x + 1/v_y - (1-ε)^2`; positive values violate the Lu–Wang relation.
pub fn lw_margin(v_x: f64, v_y: f64, epsilon: f64) -> f64 {
    1.0 / v_x + 1.0 / v_y - (1.0 - epsilon).powi(2)
}

/// SLD quantum Fisher matrix at the reference point.
pub fn qfi_matrix(model: &ProbeModel) -> Result<Matrix2<f64>, BoundError> {
    let der = model.derivatives();
    let eig = herm_eig(&der.state)?;
    let v = &eig.eigenvectors;
    let vd = v.adjoint();
    let d = der.dimension();
    let rotated = [&vd * &der.d_theta_x * v, &vd * &der.d_theta_y * v];
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut sld = [CMatrix::zeros(d, d), CMatrix::zeros(d, d)];
    for (k, dr) in rotated.iter().enumerate() {
        for a in 0..d {
            for b in 0..d {
                let s = eig.eigenvalues[a] + eig.eigenvalues[b];
                if s > 1e-12 * scale {
                    sld[k][(a, b)] = dr[(a, b)] * (2.0 / s);
                } else if dr[(a, b)].norm() > 1e-10 {
                    return Err(BoundError::SingularState);
                }
            }
        }
    }
    let rho_diag = CMatrix::from_diagonal(&eig.eigenvalues.map(|x| Complex64::new(x, 0.0)));
    let mut f = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            f[(i, j)] = trace_product(&rho_diag, &(&sld[i] * &sld[j])).re;
        }
    }
    let f = (f + f.transpose()) * 0.5;
    Ok(f)
}

/// One invariant block of the model: state, derivatives and multiplicity.
#[derive(Debug, Clone)]
pub struct ModelBlock {
    pub state: CMatrix,
    pub derivatives: [CMatrix; 2],
    pub multiplicity: f64,
}

impl ModelBlock {
    pub fn dim(&self) -> usize {
        self.state.nrows()
    }
}

/// The full `2^m`-dimensional model as a single block.
pub fn full_blocks(model: &ProbeModel) -> Vec<ModelBlock> {
    let der = model.derivatives();
    vec![ModelBlock {
        state: der.state,
        derivatives: [der.d_theta_x, der.d_theta_y],
        multiplicity: 1.0,
    }]
}

/// Spin operators `(J_x, J_y)` for spin `j2/2` in the basis `M = J, J-1, ..., -J`.
pub fn spin_xy(j2: usize) -> (CMatrix, CMatrix) {
    let d = j2 + 1;
    let j = j2 as f64 / 2.0;
    let mut jp = CMatrix::zeros(d, d);
    // index k holds M = J - k; J+ maps k+1 -> k
    for k in 0..d - 1 {
        let m = j - (k + 1) as f64;
        jp[(k, k + 1)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    (jx, jy)
}

fn binomial(n: usize, k: isize) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = k as usize;
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Permutation-symmetric decomposition of the `m`-copy model at the origin.
pub fn symmetric_blocks(epsilon: f64, m: usize) -> Result<Vec<ModelBlock>, BoundError> {
    check_epsilon(epsilon)?;
    if m == 0 {
        return Err(ProbeError::NoCopies.into());
    }
    if m > MAX_COPIES {
        return Err(BoundError::DimensionTooLarge(m));
    }
    let a = 1.0 - epsilon / 2.0;
    let b = epsilon / 2.0;
    let mut blocks = Vec::new();
    let mut j2 = m as isize;
    while j2 >= 0 {
        let k = (m as isize - j2) / 2;
        let mult = binomial(m, k) - binomial(m, k - 1);
        let d = j2 as usize + 1;
        // M = J - idx: a^(m/2 + M) b^(m/2 - M)
        let diag: Vec<f64> = (0..d)
            .map(|idx| {
                let up = (m as isize + j2) / 2 - idx as isize;
                let down = m as isize - up;
                a.powi(up as i32) * b.powi(down as i32)
            })
            .collect();
        let state = crate::linalg::diag(&diag);
        let (jx, jy) = spin_xy(j2 as usize);
        let mi = Complex64::new(0.0, -1.0);
        let dx = (&jx * &state - &state * &jx) * mi;
        let dy = (&jy * &state - &state * &jy) * mi;
        blocks.push(ModelBlock {
            state,
            derivatives: [dx, dy],
            multiplicity: mult,
        });
        j2 -= 2;
    }
    Ok(blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    /// Full `2^m` operators for `m <= 3`, symmetric blocks above.
    Auto,
    Full,
    Symmetric,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    pub formulation: Formulation,
    /// Permit `m > 3` (slow with the full formulation, reduced tolerance).
    pub allow_large: bool,
    pub solver: SdpOptions,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            formulation: Formulation::Auto,
            allow_large: false,
            solver: SdpOptions::default(),
        }
    }
}

impl BoundOptions {
    pub fn large() -> Self {
        Self {
            allow_large: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundResult {
    /// Weighted variance sum per measurement of the `m`-copy block.
    pub value: f64,
    pub kind: BoundKind,
    pub copies: usize,
    pub weight: [[f64; 2]; 2],
    /// Attaining observables; only for the full formulation.
    #[serde(skip)]
    pub observables: Option<(CMatrix, CMatrix)>,
    /// Per-parameter variances of the attaining solution (per `m`-copy block).
    pub variances: [f64; 2],
    pub iterations: usize,
    pub residual: f64,
}

fn check_weight(w: &Matrix2<f64>) -> Result<(), BoundError> {
    let sym = (w[(0, 1)] - w[(1, 0)]).abs() <= 1e-12 * (1.0 + w.abs().max());
    let psd = w[(0, 0)] >= -1e-14
        && w[(1, 1)] >= -1e-14
        && w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)] >= -1e-12;
    if sym && psd && w.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(BoundError::InvalidWeight)
    }
}

fn resolve_blocks(model: &ProbeModel, opts: &BoundOptions) -> Result<(Vec<ModelBlock>, bool), BoundError> {
    let m = model.copies;
    if m > DEFAULT_MAX_COPIES && !opts.allow_large {
        return Err(BoundError::LargeCopiesDisabled(m));
    }
    let full = match opts.formulation {
        Formulation::Full => true,
        Formulation::Symmetric => false,
        Formulation::Auto => m <= DEFAULT_MAX_COPIES,
    };
    if full {
        Ok((full_blocks(model), true))
    } else {
        Ok((symmetric_blocks(model.epsilon, m)?, false))
    }
}

fn solver_options(m: usize, opts: &BoundOptions) -> SdpOptions {
    let mut s = opts.solver;
    if m > DEFAULT_MAX_COPIES {
        s.accept_tol = s.accept_tol.max(1e-5);
    }
    s
}

/// Hermitian `d x d` matrix variable expressed in the basis
/// `E_aa`, `E_ab + E_ba`, `i E_ab - i E_ba`.
#[derive(Debug, Clone)]
struct HermVar {
    d: usize,
    /// `(a, b, kind, var)`; kind 0 diagonal, 1 real symmetric, 2 imaginary.
    basis: Vec<(usize, usize, u8, Var)>,
}

impl HermVar {
    fn new(p: &mut SdpProblem, d: usize) -> Self {
        let mut basis = Vec::with_capacity(d * d);
        for a in 0..d {
            basis.push((a, a, 0, p.add_var(0.0)));
            for b in a + 1..d {
                basis.push((a, b, 1, p.add_var(0.0)));
                basis.push((a, b, 2, p.add_var(0.0)));
            }
        }
        Self { d, basis }
    }

    /// Entries `(row, col, value)` of the basis element with `row <= col`
    /// inside a diagonal block; off-diagonal blocks need both triangles.
    fn element(a: usize, b: usize, kind: u8) -> Vec<(usize, usize, Complex64)> {
        match kind {
            0 => vec![(a, a, Complex64::new(1.0, 0.0))],
            1 => vec![(a, b, Complex64::new(1.0, 0.0)), (b, a, Complex64::new(1.0, 0.0))],
            _ => vec![(a, b, Complex64::new(0.0, 1.0)), (b, a, Complex64::new(0.0, -1.0))],
        }
    }

    /// `Tr[A E]` for Hermitian `A` and basis element `E`.
    fn trace_with(a_mat: &CMatrix, a: usize, b: usize, kind: u8) -> f64 {
        match kind {
            0 => a_mat[(a, a)].re,
            1 => 2.0 * a_mat[(a, b)].re,
            _ => 2.0 * a_mat[(a, b)].im,
        }
    }

    /// Place the variable at block position `(p, q)` (`p <= q`, sub-block size `d`)
    /// of complex LMI `block` of complex size `n`, with `offset` rows/cols.
    fn place(&self, prob: &mut SdpProblem, block: usize, n: usize, row0: usize, col0: usize, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let diagonal = row0 == col0;
        for &(a, b, kind, var) in &self.basis {
            for (r, c, z) in Self::element(a, b, kind) {
                if diagonal && r > c {
                    continue;
                }
                prob.add_hermitian_entry(var, block, n, row0 + r, col0 + c, z * scale);
            }
        }
    }

    fn value(&self, x: &nalgebra::DVector<f64>) -> CMatrix {
        let mut out = CMatrix::zeros(self.d, self.d);
        for &(a, b, kind, var) in &self.basis {
            for (r, c, z) in Self::element(a, b, kind) {
                out[(r, c)] += z * x[var.0];
            }
        }
        out
    }
}

/// Local unbiasedness: `Tr[ρ X_j] = 0`, `Tr[∂_i ρ X_j] = δ_ij`.
fn add_unbiasedness(prob: &mut SdpProblem, blocks: &[ModelBlock], xs: &[[HermVar; 2]]) {
    for j in 0..2 {
        let mut terms = Vec::new();
        for (blk, x) in blocks.iter().zip(xs) {
            for &(a, b, kind, var) in &x[j].basis {
                terms.push((var, blk.multiplicity * HermVar::trace_with(&blk.state, a, b, kind)));
            }
        }
        prob.add_equality(terms, 0.0);
        for i in 0..2 {
            let mut terms = Vec::new();
            for (blk, x) in blocks.iter().zip(xs) {
                for &(a, b, kind, var) in &x[j].basis {
                    terms.push((
                        var,
                        blk.multiplicity * HermVar::trace_with(&blk.derivatives[i], a, b, kind),
                    ));
                }
            }
            prob.add_equality(terms, if i == j { 1.0 } else { 0.0 });
        }
    }
}

/// Principal square root of a symmetric PSD 2x2 matrix.
fn psd_sqrt2(w: &Matrix2<f64>) -> Matrix2<f64> {
    let eig = w.symmetric_eigen();
    let root = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    let s = eig.eigenvectors * Matrix2::from_diagonal(&root) * eig.eigenvectors.transpose();
    (s + s.transpose()) * 0.5
}

/// Pseudo-inverse of a symmetric 2x2 matrix.
fn pinv2(s: &Matrix2<f64>) -> Matrix2<f64> {
    let eig = s.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let inv = eig
        .eigenvalues
        .map(|x| if x.abs() > 1e-12 * scale { 1.0 / x } else { 0.0 });
    eig.eigenvectors * Matrix2::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

fn weight_array(w: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[w[(0, 0)], w[(0, 1)]], [w[(1, 0)], w[(1, 1)]]]
}

/// Nagaoka–Hayashi bound on the `m`-copy block (separable-measurement SDP).
pub fn nagaoka_hayashi_sdp(model: &ProbeModel, weight: &Matrix2<f64>) -> Result<BoundResult, BoundError> {
    nagaoka_hayashi_sdp_with(model, weight, &BoundOptions::default())
}

pub fn nagaoka_hayashi_sdp_with(
    model: &ProbeModel,
    weight: &Matrix2<f64>,
    opts: &BoundOptions,
) -> Result<BoundResult, BoundError> {
    check_weight(weight)?;
    let (blocks, full) = resolve_blocks(model, opts)?;
    nagaoka_hayashi_blocks(&blocks, weight, model.copies, full, &solver_options(model.copies, opts))
}

/// Nagaoka–Hayashi SDP on an explicit block decomposition.
///
/// Per block: `[[L11, L12, X'1], [L12, L22, X'2], [X'1, X'2, I]] >= 0` with
/// all entries Hermitian and `X'_j = sum_i S_ij X_i`, `S = sqrt(W)`,
/// minimising `sum_j Tr[ρ L_jj]`. For invertible `W` this is the usual form
/// `sum_jk W_jk Tr[ρ L_jk]` after the congruence by `S`; unlike that form it
/// keeps a strictly feasible dual when `W` is singular.
pub fn nagaoka_hayashi_blocks(
    blocks: &[ModelBlock],
    weight: &Matrix2<f64>,
    copies: usize,
    keep_observables: bool,
    solver: &SdpOptions,
) -> Result<BoundResult, BoundError> {
    let s = psd_sqrt2(weight);
    let dims: Vec<usize> = blocks.iter().map(|b| 6 * b.dim()).collect();
    let mut prob = SdpProblem::new(dims);
    let mut ls = Vec::new();
    let mut xs = Vec::new();
    for (k, blk) in blocks.iter().enumerate() {
        let d = blk.dim();
        let n = 3 * d;
        let l11 = HermVar::new(&mut prob, d);
        let l22 = HermVar::new(&mut prob, d);
        let l12 = HermVar::new(&mut prob, d);
        let x1 = HermVar::new(&mut prob, d);
        let x2 = HermVar::new(&mut prob, d);
        l11.place(&mut prob, k, n, 0, 0, 1.0);
        l22.place(&mut prob, k, n, d, d, 1.0);
        l12.place(&mut prob, k, n, 0, d, 1.0);
        for j in 0..2 {
            x1.place(&mut prob, k, n, j * d, 2 * d, s[(0, j)]);
            x2.place(&mut prob, k, n, j * d, 2 * d, s[(1, j)]);
        }
        for a in 0..d {
            prob.add_hermitian_constant(k, n, 2 * d + a, 2 * d + a, Complex64::new(-1.0, 0.0));
        }
        for var in [&l11, &l22] {
            for &(a, b, kind, v) in &var.basis {
                prob.add_cost(v, blk.multiplicity * HermVar::trace_with(&blk.state, a, b, kind));
            }
        }
        ls.push([l11, l22, l12]);
        xs.push([x1, x2]);
    }
    add_unbiasedness(&mut prob, blocks, &xs);

    let sol = prob.solve(solver)?;
    // Tr[ρ L'] as a 2x2 matrix, then undo the congruence: L = S^+ L' S^+.
    let mut t = Matrix2::zeros();
    for (blk, l) in blocks.iter().zip(&ls) {
        let tr = |h: &HermVar| blk.multiplicity * trace_product(&blk.state, &h.value(&sol.x)).re;
        t[(0, 0)] += tr(&l[0]);
        t[(1, 1)] += tr(&l[1]);
        t[(0, 1)] += tr(&l[2]);
    }
    t[(1, 0)] = t[(0, 1)];
    let s_pinv = pinv2(&s);
    let orig = s_pinv * t * s_pinv;
    let variances = [orig[(0, 0)], orig[(1, 1)]];
    let observables = keep_observables.then(|| (xs[0][0].value(&sol.x), xs[0][1].value(&sol.x)));
    Ok(BoundResult {
        value: sol.primal_objective,
        kind: BoundKind::NagaokaHayashi,
        copies,
        weight: weight_array(weight),
        observables,
        variances,
        iterations: sol.iterations,
        residual: sol.residual.max(sol.gap),
    })
}

/// Holevo bound on the `m`-copy block.
pub fn holevo_sdp(model: &ProbeModel, weight: &Matrix2<f64>) -> Result<BoundResult, BoundError> {
    holevo_sdp_with(model, weight, &BoundOptions::default())
}

pub fn holevo_sdp_with(
    model: &ProbeModel,
    weight: &Matrix2<f64>,
    opts: &BoundOptions,
) -> Result<BoundResult, BoundError> {
    check_weight(weight)?;
    let (blocks, full) = resolve_blocks(model, opts)?;
    holevo_blocks(&blocks, weight, model.copies, full, &solver_options(model.copies, opts))
}

/// Holevo SDP: minimise `Tr[V]` over real symmetric `V` with
/// `[[V, (R S)^†], [R S, I]] >= 0`, `S = sqrt(W)`, where `R` stacks
/// `sqrt(n_J) vec(X_j sqrt(ρ_J))` so that `R^† R = Z`, `Z_ij = Tr[ρ X_i X_j]`.
pub fn holevo_blocks(
    blocks: &[ModelBlock],
    weight: &Matrix2<f64>,
    copies: usize,
    keep_observables: bool,
    solver: &SdpOptions,
) -> Result<BoundResult, BoundError> {
    let rows: usize = blocks.iter().map(|b| b.dim() * b.dim()).sum();
    let n = 2 + rows;
    let s = psd_sqrt2(weight);
    let mut prob = SdpProblem::new(vec![2 * n]);
    let v11 = prob.add_var(1.0);
    let v22 = prob.add_var(1.0);
    let v12 = prob.add_var(0.0);
    let one = Complex64::new(1.0, 0.0);
    prob.add_hermitian_entry(v11, 0, n, 0, 0, one);
    prob.add_hermitian_entry(v22, 0, n, 1, 1, one);
    prob.add_hermitian_entry(v12, 0, n, 0, 1, one);
    for r in 2..n {
        prob.add_hermitian_constant(0, n, r, r, Complex64::new(-1.0, 0.0));
    }

    let mut xs = Vec::new();
    let mut offset = 2;
    for blk in blocks {
        let d = blk.dim();
        // Pure states leave part of X outside the LMI; padding the spectrum
        // keeps every variable coupled.
        let sqrt_rho = herm_eig(&blk.state)?.map_spectrum(|x| x.max(1e-12).sqrt());
        let sm = blk.multiplicity.sqrt();
        let pair = [HermVar::new(&mut prob, d), HermVar::new(&mut prob, d)];
        for (j, x) in pair.iter().enumerate() {
            for &(a, b, kind, var) in &x.basis {
                // (E sqrt(ρ))_{rc} = sum_k E_rk sqrt(ρ)_kc
                for (r, k, z) in HermVar::element(a, b, kind) {
                    for c in 0..d {
                        let val = z * sqrt_rho[(k, c)] * sm;
                        if val.norm() == 0.0 {
                            continue;
                        }
                        // column l of R S is sum_j S_jl R_j
                        for l in 0..2 {
                            if s[(j, l)] != 0.0 {
                                prob.add_hermitian_entry(var, 0, n, l, offset + r * d + c, val.conj() * s[(j, l)]);
                            }
                        }
                    }
                }
            }
        }
        xs.push(pair);
        offset += d * d;
    }
    add_unbiasedness(&mut prob, blocks, &xs);

    let sol = prob.solve(solver)?;

    // Z from the optimal observables.
    let mut z = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (blk, pair) in blocks.iter().zip(&xs) {
        let vals = [pair[0].value(&sol.x), pair[1].value(&sol.x)];
        for i in 0..2 {
            for j in 0..2 {
                z[i][j] += trace_product(&blk.state, &(&vals[i] * &vals[j])) * blk.multiplicity;
            }
        }
    }
    // The incompatibility term 2 sqrt(w_x w_y) |Im Z_12| is split between the
    // parameters in proportion that keeps w_x p_x = w_y p_y.
    let im = z[0][1].im.abs();
    let (wx, wy) = (weight[(0, 0)], weight[(1, 1)]);
    let (px, py) = if wx > 0.0 && wy > 0.0 {
        (im * (wy / wx).sqrt(), im * (wx / wy).sqrt())
    } else {
        (0.0, 0.0)
    };
    let variances = [z[0][0].re + px, z[1][1].re + py];
    let observables = keep_observables.then(|| (xs[0][0].value(&sol.x), xs[0][1].value(&sol.x)));
    Ok(BoundResult {
        value: sol.primal_objective,
        kind: BoundKind::Holevo,
        copies,
        weight: weight_array(weight),
        observables,
        variances,
        iterations: sol.iterations,
        residual: sol.residual.max(sol.gap),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub v_x: f64,
    pub v_y: f64,
    pub weight_w: f64,
    pub bound_kind: BoundKind,
}

/// Boundary points `(v_x, v_y)` of the attainable per-copy variance region for
/// `W = diag(w, 1-w)` at each weight.
pub fn tradeoff_curve(
    epsilon: f64,
    m: usize,
    kind: BoundKind,
    weights: &[f64],
    opts: &BoundOptions,
) -> Result<Vec<TradeoffPoint>, BoundError> {
    let model = ProbeModel::new(epsilon, m)?;
    weights
        .iter()
        .map(|&w| {
            if !(w > 0.0 && w < 1.0) {
                return Err(BoundError::InvalidWeightGrid(w));
            }
            let weight = Matrix2::new(w, 0.0, 0.0, 1.0 - w);
            let res = match kind {
                BoundKind::Holevo => holevo_sdp_with(&model, &weight, opts)?,
                _ => nagaoka_hayashi_sdp_with(&model, &weight, opts)?,
            };
            let per_copy = m as f64;
            Ok(TradeoffPoint {
                v_x: res.variances[0] * per_copy,
                v_y: res.variances[1] * per_copy,
                weight_w: w,
                bound_kind: res.kind,
            })
        })
        .collect()
}

/// Envelope point from the support function `C(w)` by central differences:
/// `v_x = C + (1-w) C'`, `v_y = C - w C'`. Used to cross-check extraction.
pub fn support_point(
    epsilon: f64,
    m: usize,
    kind: BoundKind,
    w: f64,
    h: f64,
    opts: &BoundOptions,
) -> Result<(f64, f64), BoundError> {
    let model = ProbeModel::new(epsilon, m)?;
    let eval = |w: f64| -> Result<f64, BoundError> {
        let weight = Matrix2::new(w, 0.0, 0.0, 1.0 - w);
        let r = match kind {
            BoundKind::Holevo => holevo_sdp_with(&model, &weight, opts)?,
            _ => nagaoka_hayashi_sdp_with(&model, &weight, opts)?,
        };
        Ok(r.value * m as f64)
    };
    let c = eval(w)?;
    let dc = (eval(w + h)? - eval(w - h)?) / (2.0 * h);
    Ok((c + (1.0 - w) * dc, c - w * dc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ident() -> Matrix2<f64> {
        Matrix2::identity()
    }

    #[test]
    fn closed_form_examples() {
        let c = closed_form(0.5).unwrap();
        assert_abs_diff_eq!(c.n1, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.n2, 6.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.holevo, 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.sld_sum, 8.0, epsilon = 1e-12);
        let c = closed_form(0.0).unwrap();
        assert_abs_diff_eq!(c.n1, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.n2, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.holevo, 4.0, epsilon = 1e-12);
        assert!(closed_form(1.0).is_err());
    }

    #[test]
    fn lw_examples() {
        assert_abs_diff_eq!(lw_margin(8.0, 8.0, 0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lw_margin(6.5, 6.5, 0.5), 2.0 / 6.5 - 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(lw_margin(16.0, 16.0, 0.5), -0.125, epsilon = 1e-15);
    }

    /// Bloch-vector formula for a qubit.
    fn bloch_qfi(eps: f64) -> Matrix2<f64> {
        // r = (1-ε)(0,0,1) at origin, ∂_x r = (0,-(1-ε),0), ∂_y r = ((1-ε),0,0);
        // r·∂r = 0 so F = ∂_i r · ∂_j r.
        Matrix2::identity() * (1.0 - eps).powi(2)
    }

    #[test]
    fn qfi_examples() {
        let f = qfi_matrix(&ProbeModel::new(0.5, 1).unwrap()).unwrap();
        assert!((f - bloch_qfi(0.5)).abs().max() < 1e-10);
        let f = qfi_matrix(&ProbeModel::new(0.0, 1).unwrap()).unwrap();
        assert!((f - Matrix2::identity()).abs().max() < 1e-10);
        let f = qfi_matrix(&ProbeModel::new(0.5, 2).unwrap()).unwrap();
        assert!((f - Matrix2::identity() * 0.5).abs().max() < 1e-10);
    }

    #[test]
    fn spin_half_matches_pauli() {
        let (jx, jy) = spin_xy(1);
        let half = Complex64::new(0.5, 0.0);
        assert!((jx - crate::linalg::pauli_x() * half).norm() < 1e-15);
        assert!((jy - crate::linalg::pauli_y() * half).norm() < 1e-15);
    }

    #[test]
    fn symmetric_blocks_account_for_full_space() {
        for m in 1..=7 {
            let blocks = symmetric_blocks(0.3, m).unwrap();
            let dim: f64 = blocks.iter().map(|b| b.multiplicity * b.dim() as f64).sum();
            assert_abs_diff_eq!(dim, 2f64.powi(m as i32), epsilon = 1e-9);
            let tr: f64 = blocks
                .iter()
                .map(|b| b.multiplicity * b.state.trace().re)
                .sum();
            assert_abs_diff_eq!(tr, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nagaoka_single_and_two_copy() {
        let r = nagaoka_hayashi_sdp(&ProbeModel::new(0.5, 1).unwrap(), &ident()).unwrap();
        assert_abs_diff_eq!(r.value, 16.0, epsilon = 1e-5);
        let r = nagaoka_hayashi_sdp(&ProbeModel::new(0.5, 2).unwrap(), &ident()).unwrap();
        assert_abs_diff_eq!(r.value, 6.5, epsilon = 1e-5);
    }

    #[test]
    fn holevo_examples() {
        let r = holevo_sdp(&ProbeModel::new(0.5, 1).unwrap(), &ident()).unwrap();
        assert_abs_diff_eq!(r.value, 12.0, epsilon = 1e-5);
        let r = holevo_sdp(&ProbeModel::new(0.0, 1).unwrap(), &ident()).unwrap();
        assert_abs_diff_eq!(r.value, 4.0, epsilon = 1e-5);
        let r = holevo_sdp(&ProbeModel::new(0.5, 1).unwrap(), &Matrix2::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.value, 4.0, epsilon = 1e-5);
    }
}
