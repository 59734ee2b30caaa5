//! Small dense primal-dual interior-point solver for linear matrix inequalities.
//!
//! Problems have the form
//!
//! ```text
//! minimise    c^T x
//! subject to  sum_i x_i F_i^(b) - F_0^(b)  >= 0      for every block b
//!             A x = b
//! ```
//!
//! with the dual
//!
//! ```text
//! maximise    sum_b Tr[F_0^(b) Z_b] + b^T lambda
//! subject to  Tr[F_i Z] + (A^T lambda)_i = c_i,  Z >= 0.
//! ```
//!
//! The iteration is the infeasible-start HKM path-following method with a
//! Mehrotra predictor-corrector. The coefficient matrices `F_i` are stored
//! sparsely, which keeps the Schur-complement assembly cheap for the
//! basis-element structure produced by [`crate::bounds`]. Complex Hermitian
//! blocks are handled through the real embedding `[[Re H, -Im H], [Im H, Re H]]`.
//!
//! The solver is deterministic: no randomness, fixed iteration order.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error(
        "SDP solver did not converge after {iterations} iterations \
         (gap {gap:.2e}, residual {residual:.2e})"
    )]
    NotConverged {
        iterations: usize,
        gap: f64,
        residual: f64,
    },

    #[error("Schur complement became numerically singular at iteration {0}")]
    Singular(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub max_iterations: usize,
    /// Target relative duality gap.
    pub gap_tol: f64,
    /// Target relative primal/dual infeasibility.
    pub feas_tol: f64,
    /// Looser tolerance accepted if the iteration stalls before reaching the
    /// targets.
    pub accept_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 150,
            gap_tol: 1e-10,
            feas_tol: 1e-10,
            accept_tol: 1e-7,
            step_fraction: 0.97,
        }
    }
}

/// Entry `(block, row, col, value)` of a coefficient matrix, `row <= col`;
/// off-diagonal entries stand for both symmetric positions.
#[derive(Debug, Clone, Copy)]
struct Entry {
    block: usize,
    row: usize,
    col: usize,
    value: f64,
}

/// Index of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub usize);

#[derive(Debug, Clone)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    constants: Vec<DMatrix<f64>>,
    cost: Vec<f64>,
    coeffs: Vec<Vec<Entry>>,
    eq_rows: Vec<(Vec<(usize, f64)>, f64)>,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DVector<f64>,
    /// Dual matrices, one per block.
    pub z: Vec<DMatrix<f64>>,
    pub lambda: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// Largest relative infeasibility at termination.
    pub residual: f64,
    /// Relative duality gap at termination.
    pub gap: f64,
}

impl SdpProblem {
    /// Problem with real symmetric LMI blocks of the given sizes.
    pub fn new(block_dims: Vec<usize>) -> Self {
        let constants = block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        Self {
            block_dims,
            constants,
            cost: Vec::new(),
            coeffs: Vec::new(),
            eq_rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_var(&mut self, cost: f64) -> Var {
        self.cost.push(cost);
        self.coeffs.push(Vec::new());
        Var(self.cost.len() - 1)
    }

    pub fn add_cost(&mut self, var: Var, cost: f64) {
        self.cost[var.0] += cost;
    }

    /// Add `value` to entry `(i, j)` (and `(j, i)`) of `F_var` in `block`.
    pub fn add_entry(&mut self, var: Var, block: usize, i: usize, j: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        self.coeffs[var.0].push(Entry {
            block,
            row,
            col,
            value,
        });
    }

    /// Add `value` to entry `(i, j)` (and `(j, i)`) of the constant `F_0`.
    pub fn add_constant(&mut self, block: usize, i: usize, j: usize, value: f64) {
        self.constants[block][(i, j)] += value;
        if i != j {
            self.constants[block][(j, i)] += value;
        }
    }

    /// Add entry `(i, j)` of a complex Hermitian coefficient living in a real
    /// block of size `2n` that embeds an `n x n` Hermitian matrix. Entry `(j, i)`
    /// is implied as the conjugate.
    pub fn add_hermitian_entry(
        &mut self,
        var: Var,
        block: usize,
        n: usize,
        i: usize,
        j: usize,
        z: Complex64,
    ) {
        if i == j {
            self.add_entry(var, block, i, i, z.re);
            self.add_entry(var, block, i + n, i + n, z.re);
            return;
        }
        self.add_entry(var, block, i, j, z.re);
        self.add_entry(var, block, i + n, j + n, z.re);
        self.add_entry(var, block, i + n, j, z.im);
        self.add_entry(var, block, i, j + n, -z.im);
    }

    /// Constant counterpart of [`Self::add_hermitian_entry`].
    pub fn add_hermitian_constant(&mut self, block: usize, n: usize, i: usize, j: usize, z: Complex64) {
        if i == j {
            self.add_constant(block, i, i, z.re);
            self.add_constant(block, i + n, i + n, z.re);
            return;
        }
        self.add_constant(block, i, j, z.re);
        self.add_constant(block, i + n, j + n, z.re);
        self.add_constant(block, i + n, j, z.im);
        self.add_constant(block, i, j + n, -z.im);
    }

    /// Add the linear equality `sum coeff * x = rhs`.
    pub fn add_equality(&mut self, terms: Vec<(Var, f64)>, rhs: f64) {
        let terms = terms
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(v, c)| (v.0, c))
            .collect();
        self.eq_rows.push((terms, rhs));
    }

    fn apply(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            self.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (k, entries) in self.coeffs.iter().enumerate() {
            let xk = x[k];
            if xk == 0.0 {
                continue;
            }
            for e in entries {
                out[e.block][(e.row, e.col)] += xk * e.value;
                if e.row != e.col {
                    out[e.block][(e.col, e.row)] += xk * e.value;
                }
            }
        }
        out
    }

    /// `Tr[F_k Z]` for every variable.
    fn adjoint(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.num_vars(),
            self.coeffs.iter().map(|entries| {
                entries
                    .iter()
                    .map(|e| {
                        let zb = &z[e.block];
                        if e.row == e.col {
                            e.value * zb[(e.row, e.col)]
                        } else {
                            e.value * (zb[(e.row, e.col)] + zb[(e.col, e.row)])
                        }
                    })
                    .sum()
            }),
        )
    }

    fn eq_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.eq_rows.len(), self.num_vars());
        for (r, (terms, _)) in self.eq_rows.iter().enumerate() {
            for &(k, c) in terms {
                a[(r, k)] += c;
            }
        }
        a
    }

    /// Schur complement `M_ij = Tr[F_i S^-1 F_j Z]`.
    fn schur(&self, s_inv: &[DMatrix<f64>], z: &[DMatrix<f64>]) -> DMatrix<f64> {
        let n = self.num_vars();
        let mut m = DMatrix::zeros(n, n);
        let mut p: Vec<DMatrix<f64>> =
            self.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let mut touched = vec![false; self.block_dims.len()];
        for j in 0..n {
            for (b, t) in touched.iter_mut().enumerate() {
                if *t {
                    p[b].fill(0.0);
                    *t = false;
                }
            }
            // P_j = S^-1 F_j Z, built from the rank-one pieces of F_j.
            for e in &self.coeffs[j] {
                let b = e.block;
                touched[b] = true;
                add_outer(&mut p[b], &s_inv[b], e.row, &z[b], e.col, e.value);
                if e.row != e.col {
                    add_outer(&mut p[b], &s_inv[b], e.col, &z[b], e.row, e.value);
                }
            }
            for i in 0..=j {
                let mut acc = 0.0;
                for e in &self.coeffs[i] {
                    let pb = &p[e.block];
                    if e.row == e.col {
                        acc += e.value * pb[(e.row, e.row)];
                    } else {
                        acc += e.value * (pb[(e.col, e.row)] + pb[(e.row, e.col)]);
                    }
                }
                m[(i, j)] = acc;
            }
        }
        for j in 0..n {
            for i in 0..j {
                let v = m[(i, j)];
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn solve(&self, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
        let n = self.num_vars();
        let nb = self.block_dims.len();
        let total_dim: usize = self.block_dims.iter().sum();
        let c = DVector::from_vec(self.cost.clone());
        let a = self.eq_matrix();
        let b = DVector::from_iterator(self.eq_rows.len(), self.eq_rows.iter().map(|(_, r)| *r));

        let c_norm = 1.0 + c.norm();
        let b_norm = 1.0 + b.norm();
        let f0_norm = 1.0
            + self
                .constants
                .iter()
                .map(|m| m.norm_squared())
                .sum::<f64>()
                .sqrt();

        let tau = 10.0 * (1.0f64).max(c.amax()).max(b.amax());
        let mut x = DVector::zeros(n);
        let mut lambda = DVector::zeros(self.eq_rows.len());
        let mut s: Vec<DMatrix<f64>> = self
            .block_dims
            .iter()
            .map(|&d| DMatrix::identity(d, d) * tau)
            .collect();
        let mut z = s.clone();

        let mut best: Option<(f64, SdpSolution)> = None;
        let mut stall = 0usize;

        for iter in 0..opts.max_iterations {
            let fx = self.apply(&x);
            let rs: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| &fx[k] - &self.constants[k] - &s[k])
                .collect();
            let rd = &c - self.adjoint(&z) - a.transpose() * &lambda;
            let re = &b - &a * &x;

            let mu = (0..nb).map(|k| s[k].dot(&z[k])).sum::<f64>() / total_dim as f64;
            let pobj = c.dot(&x);
            let dobj = (0..nb).map(|k| self.constants[k].dot(&z[k])).sum::<f64>() + b.dot(&lambda);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let p_inf = rs.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt() / f0_norm;
            let d_inf = rd.norm() / c_norm;
            let e_inf = re.norm() / b_norm;
            let residual = p_inf.max(d_inf).max(e_inf);

            let snapshot = |iterations| SdpSolution {
                x: x.clone(),
                z: z.clone(),
                lambda: lambda.clone(),
                primal_objective: pobj,
                dual_objective: dobj,
                iterations,
                residual,
                gap,
            };

            let merit = gap.max(residual);
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((merit, snapshot(iter)));
                stall = 0;
            } else {
                stall += 1;
            }

            if gap <= opts.gap_tol && residual <= opts.feas_tol {
                return Ok(snapshot(iter));
            }
            if stall >= 8 {
                break;
            }

            let s_chol: Vec<Cholesky<f64, Dyn>> = match s.iter().map(|m| m.clone().cholesky()).collect() {
                Some(v) => v,
                None => break,
            };
            let s_inv: Vec<DMatrix<f64>> = s_chol.iter().map(|ch| ch.inverse()).collect();
            let schur = self.schur(&s_inv, &z);
            let Some(kkt) = Kkt::new(schur, &a) else {
                return Err(SdpError::Singular(iter));
            };

            let direction = |sigma_mu: f64, corr: Option<&[DMatrix<f64>]>| {
                // K = sigma mu S^-1 - Z - S^-1 Rs Z - S^-1 corr
                let k: Vec<DMatrix<f64>> = (0..nb)
                    .map(|blk| {
                        let mut kb = &s_inv[blk] * sigma_mu - &z[blk] - &s_inv[blk] * &rs[blk] * &z[blk];
                        if let Some(cr) = corr {
                            kb -= &s_inv[blk] * &cr[blk];
                        }
                        kb
                    })
                    .collect();
                // M dx - A^T dl = F*(K) - rd,  A dx = re
                let g = self.adjoint(&k) - &rd;
                let (dx, dl) = kkt.solve(&g, &re);
                let fdx = self.apply(&dx);
                let ds: Vec<DMatrix<f64>> = (0..nb).map(|blk| &fdx[blk] + &rs[blk]).collect();
                let dz: Vec<DMatrix<f64>> = (0..nb)
                    .map(|blk| {
                        let raw = &k[blk] - &s_inv[blk] * &fdx[blk] * &z[blk];
                        (&raw + raw.transpose()) * 0.5
                    })
                    .collect();
                (dx, dl, ds, dz)
            };

            // predictor
            let (_, _, ds_a, dz_a) = direction(0.0, None);
            let ap = max_step(&s, &ds_a).min(1.0);
            let ad = max_step(&z, &dz_a).min(1.0);
            let mu_aff = (0..nb)
                .map(|k| (&s[k] + &ds_a[k] * ap).dot(&(&z[k] + &dz_a[k] * ad)))
                .sum::<f64>()
                / total_dim as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let corr: Vec<DMatrix<f64>> = (0..nb).map(|k| &ds_a[k] * &dz_a[k]).collect();
            let (dx, dl, ds, dz) = direction(sigma * mu, Some(&corr));
            let ap = (opts.step_fraction * max_step(&s, &ds)).min(1.0);
            let ad = (opts.step_fraction * max_step(&z, &dz)).min(1.0);

            x += &dx * ap;
            for k in 0..nb {
                s[k] += &ds[k] * ap;
                z[k] += &dz[k] * ad;
                let sym = (&s[k] + s[k].transpose()) * 0.5;
                s[k] = sym;
                let sym = (&z[k] + z[k].transpose()) * 0.5;
                z[k] = sym;
            }
            lambda += &dl * ad;
        }

        let (_, sol) = best.expect("at least one iteration");
        if sol.gap <= opts.accept_tol && sol.residual <= opts.accept_tol {
            Ok(sol)
        } else {
            Err(SdpError::NotConverged {
                iterations: sol.iterations,
                gap: sol.gap,
                residual: sol.residual,
            })
        }
    }
}

/// `P += v * S^-1[:, r] (Z[c, :])`.
fn add_outer(p: &mut DMatrix<f64>, s_inv: &DMatrix<f64>, r: usize, z: &DMatrix<f64>, c: usize, v: f64) {
    let d = p.nrows();
    for col in 0..d {
        let zc = v * z[(c, col)];
        if zc == 0.0 {
            continue;
        }
        for row in 0..d {
            p[(row, col)] += s_inv[(row, r)] * zc;
        }
    }
}

/// LU-factorised saddle system `[[M, -A^T], [A, 0]]` with iterative refinement.
struct Kkt {
    matrix: DMatrix<f64>,
    lu: nalgebra::LU<f64, Dyn, Dyn>,
    n: usize,
}

impl Kkt {
    fn new(m: DMatrix<f64>, a: &DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        let p = a.nrows();
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&m);
        k.view_mut((0, n), (n, p)).copy_from(&(-a.transpose()));
        k.view_mut((n, 0), (p, n)).copy_from(a);
        let lu = k.clone().lu();
        if lu.is_invertible() {
            return Some(Self { matrix: k, lu, n });
        }
        let scale = m.diagonal().amax().max(1.0);
        for k_shift in 0..4 {
            let delta = scale * 1e-14 * 100f64.powi(k_shift);
            let mut shifted = k.clone();
            for i in 0..n {
                shifted[(i, i)] += delta;
            }
            let lu = shifted.clone().lu();
            if lu.is_invertible() {
                return Some(Self { matrix: shifted, lu, n });
            }
        }
        None
    }

    fn solve(&self, g: &DVector<f64>, re: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.n;
        let mut rhs = DVector::zeros(self.matrix.nrows());
        rhs.rows_mut(0, n).copy_from(g);
        rhs.rows_mut(n, re.len()).copy_from(re);
        let mut sol = self.lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(rhs.len()));
        for _ in 0..3 {
            let r = &rhs - &self.matrix * &sol;
            match self.lu.solve(&r) {
                Some(c) => sol += c,
                None => break,
            }
        }
        (sol.rows(0, n).into_owned(), sol.rows(n, re.len()).into_owned())
    }
}

/// Largest `alpha` with `X + alpha dX >= 0` for every block (may be infinite).
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, dxb) in x.iter().zip(dx) {
        let Some(ch) = xb.clone().cholesky() else {
            return 0.0;
        };
        let l = ch.l();
        // L^-1 dX L^-T
        let Some(linv) = l.clone().try_inverse() else {
            return 0.0;
        };
        let m = &linv * dxb * linv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let lmin = m.symmetric_eigenvalues().min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}
