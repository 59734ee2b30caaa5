//! Dense complex linear algebra used throughout the crate.
//!
//! Everything is built on [`nalgebra::DMatrix`] with `Complex64` entries. The
//! helpers here add the pieces nalgebra leaves to the caller: deterministic
//! Hermitian eigendecompositions, PSD square roots, trace norms and Kronecker
//! products of operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Dense complex matrix. Rows and columns are at least one.
pub type CMatrix = DMatrix<Complex64>;

/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Frobenius tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOL` are treated as a genuine loss of positivity.
pub const PSD_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (|A - A^dagger|_F = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending. Each eigenvector column has its largest-magnitude
/// entry made real and positive, and (numerically) degenerate eigenvalues are
/// ordered by the first differing eigenvector entry, so that the output is a
/// deterministic function of the input.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = Complex64::from(f(lambda));
            for r in 0..scaled.nrows() {
                scaled[(r, k)] *= s;
            }
        }
        &scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(|x| x)
    }
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Real diagonal matrix as a complex matrix.
pub fn diag(entries: &[f64]) -> CMatrix {
    let d = entries.len();
    let mut m = CMatrix::zeros(d, d);
    for (k, &e) in entries.iter().enumerate() {
        m[(k, k)] = Complex64::from(e);
    }
    m
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    let mut it = factors.into_iter();
    let first = it.next().expect("kron_all needs at least one factor").clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|A - A^dagger|_F`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint()))
}

pub fn check_hermitian(a: &CMatrix) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let deviation = hermiticity_defect(a);
    if deviation > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation });
    }
    Ok(())
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Full spectral decomposition of a Hermitian matrix.
pub fn herm_eig(a: &CMatrix) -> Result<HermitianEig, LinalgError> {
    check_hermitian(a)?;
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let d = a.nrows();

    let mut cols: Vec<(f64, CVector)> = (0..d)
        .map(|k| {
            let mut v: CVector = eig.eigenvectors.column(k).into_owned();
            fix_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();

    // Sort by eigenvalue, breaking numerical ties by eigenvector entries.
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tie = 1e-12 * scale;
    cols.sort_by(|(la, va), (lb, vb)| {
        if (la - lb).abs() > tie {
            return la.partial_cmp(lb).unwrap();
        }
        for (x, y) in va.iter().zip(vb.iter()) {
            if (x.re - y.re).abs() > 1e-12 {
                return y.re.partial_cmp(&x.re).unwrap();
            }
            if (x.im - y.im).abs() > 1e-12 {
                return y.im.partial_cmp(&x.im).unwrap();
            }
        }
        std::cmp::Ordering::Equal
    });

    let eigenvalues = DVector::from_iterator(d, cols.iter().map(|(l, _)| *l));
    let mut eigenvectors = CMatrix::zeros(d, d);
    for (k, (_, v)) in cols.iter().enumerate() {
        eigenvectors.set_column(k, v);
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Rotate the global phase of `v` so its largest-magnitude entry (first one on
/// ties) is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (k, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag + 1e-12 {
            best = k;
            best_mag = mag;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_mag;
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[best] = Complex64::new(v[best].re, 0.0);
}

/// Hermitian PSD square root. Eigenvalues in `[-1e-8, 0)` are clipped to zero.
pub fn sqrtm_psd(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = herm_eig(a)?;
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(LinalgError::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(eig.map_spectrum(|x| x.max(0.0).sqrt()))
}

/// Trace norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_abs(a: &CMatrix) -> Result<f64, LinalgError> {
    let eig = herm_eig(a)?;
    Ok(eig.eigenvalues.iter().map(|x| x.abs()).sum())
}

/// `exp(i t H)` for Hermitian `H`.
pub fn expm_i_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix, LinalgError> {
    let eig = herm_eig(h)?;
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, t * lambda);
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= phase;
        }
    }
    Ok(&scaled * v.adjoint())
}

/// `|U^dagger U - I|_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.nrows();
    frobenius(&(u.adjoint() * u - identity(d)))
}

/// Distance between `a` and `b` after removing the best global phase:
/// `min_phi |a - e^{i phi} b|_op`, evaluated at the phase maximising
/// `Re Tr[a^dagger e^{i phi} b]`.
pub fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap = trace_product(&a.adjoint(), b);
    let phase = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        ONE
    };
    operator_norm(&(a - b * phase))
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    let g = a.adjoint() * a;
    let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    match herm_eig(&g) {
        Ok(e) => e.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

/// `a = u diag(s) v^dagger` for `a` with at least as many rows as columns;
/// `s` is sorted descending and `u` has orthonormal columns.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided Jacobi SVD. nalgebra's complex SVD returns wrong factors on some
/// rank-deficient inputs, so everything here goes through this instead.
pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    assert!(m >= n, "svd expects rows >= columns");
    let mut g = a.clone();
    let mut v = identity(n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = g.column(p).norm_squared();
                let beta = g.column(q).norm_squared();
                let gamma = g.column(p).dotc(&g.column(q));
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / gamma.norm();
                let zeta = (beta - alpha) / (2.0 * gamma.norm());
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut g, &mut v] {
                    let cp = mat.column(p).into_owned();
                    let cq = mat.column(q) * phase.conj();
                    mat.set_column(p, &(&cp * Complex64::new(c, 0.0) - &cq * Complex64::new(s, 0.0)));
                    mat.set_column(q, &(&cp * Complex64::new(s, 0.0) + &cq * Complex64::new(c, 0.0)));
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| g.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut u = CMatrix::zeros(m, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        vs.set_column(k, &v.column(j));
        let mut col = if norms[j] > 1e-13 * scale && norms[j] > 0.0 {
            g.column(j) / Complex64::new(norms[j], 0.0)
        } else {
            // null direction: complete from the computational basis
            let mut best = CVector::zeros(m);
            for e in 0..m {
                let mut cand = CVector::zeros(m);
                cand[e] = ONE;
                for r in 0..k {
                    let proj = u.column(r).dotc(&cand);
                    cand -= u.column(r) * proj;
                }
                if cand.norm() > best.norm() {
                    best = cand;
                }
            }
            let nb = best.norm();
            best / Complex64::new(nb, 0.0)
        };
        for r in 0..k {
            let proj = u.column(r).dotc(&col);
            col -= u.column(r) * proj;
        }
        let nc = col.norm();
        u.set_column(k, &(col / Complex64::new(nc, 0.0)));
    }
    Svd { u, s, v: vs }
}

/// Nearest unitary in Frobenius norm (polar factor of a square matrix).
pub fn polar_unitary(a: &CMatrix) -> CMatrix {
    let d = svd(a);
    d.u * d.v.adjoint()
}

/// `|Tr[a^dagger b]| / d`: one for unitaries equal up to global phase.
pub fn unitary_overlap(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_product(&a.adjoint(), b).norm() / a.nrows() as f64
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Absorb the phases of diag(R) so the distribution is exactly Haar.
    let mut out = q;
    for k in 0..d {
        let rk = r[(k, k)];
        let ph = if rk.norm() > 0.0 { rk / rk.norm() } else { ONE };
        for i in 0..d {
            out[(i, k)] *= ph;
        }
    }
    out
}

/// Random Hermitian matrix with standard-normal entries.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&g + g.adjoint()).scale(0.5)
}
