use nalgebra::DMatrix;
use num_complex::Complex64;

use super::oneq::{push_zyz, rotation_z, zyz};
use super::{check_unitary, cx_matrix, factor_kron, Circuit, Gate, SynthError};
use crate::linalg::{identity, kron, pauli_x, pauli_y, pauli_z, phase_distance, trace_product, CMatrix};

const PI: f64 = std::f64::consts::PI;
const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;
const FRAC_PI_4: f64 = std::f64::consts::FRAC_PI_4;

/// `u = e^{i phase} (A1 ⊗ A2) exp(i(k_x XX + k_y YY + k_z ZZ)) (B1 ⊗ B2)`.
#[derive(Debug, Clone)]
pub struct KakDecomposition {
    pub k_vector: [f64; 3],
    /// `[A1, A2, B1, B2]`
    pub locals: [CMatrix; 4],
    pub global_phase: f64,
    pub circuit: Circuit,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn magic() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(
        4,
        4,
        &[
            c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, h),
            c(0.0, 0.0), c(0.0, h), c(h, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, h), c(-h, 0.0), c(0.0, 0.0),
            c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -h),
        ],
    )
}

fn paulis() -> [CMatrix; 3] {
    [pauli_x(), pauli_y(), pauli_z()]
}

fn doubled(axis: usize) -> CMatrix {
    let p = &paulis()[axis];
    kron(p, p)
}

/// `exp(i(a XX + b YY + c ZZ))`.
pub fn canonical_gate(a: f64, b: f64, c_: f64) -> CMatrix {
    // the three terms commute and are diagonal in the magic basis
    let m = magic();
    let mut d = CMatrix::zeros(4, 4);
    for i in 0..4 {
        let mut t = 0.0;
        for (axis, k) in [a, b, c_].into_iter().enumerate() {
            t += k * (m.adjoint() * doubled(axis) * &m)[(i, i)].re;
        }
        d[(i, i)] = Complex64::from_polar(1.0, t);
    }
    &m * d * m.adjoint()
}

/// CNOT count implied by a canonical k-vector: 0, 1, 2 or 3.
pub fn cnot_class(k: [f64; 3]) -> usize {
    let tol = 1e-8;
    if k.iter().all(|x| x.abs() < tol) {
        0
    } else if (k[0] - FRAC_PI_4).abs() < tol && k[1].abs() < tol && k[2].abs() < tol {
        1
    } else if k[2].abs() < tol {
        2
    } else {
        3
    }
}

/// `u ∝ left · N(k) · right` with local `left`, `right`.
struct Core {
    k: [f64; 3],
    left: CMatrix,
    right: CMatrix,
}

/// Real orthogonal `P` with `P^T m P` diagonal, for complex symmetric unitary `m`.
fn orthogonal_diagonaliser(m: &CMatrix) -> DMatrix<f64> {
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    // Re and Im commute; a generic combination separates their joint eigenspaces.
    for r in [0.618_033_988_749_894_9, std::f64::consts::SQRT_2, -std::f64::consts::E, 0.319_381_530] {
        let comb = &re + &im * r;
        let sym = (&comb + comb.transpose()) * 0.5;
        let p = sym.symmetric_eigen().eigenvectors;
        let pc = p.map(|x| c(x, 0.0));
        let d = pc.transpose() * m * &pc;
        let mut off = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    off += d[(i, j)].norm_sqr();
                }
            }
        }
        if best.as_ref().is_none_or(|(o, _)| off < *o) {
            best = Some((off, p));
        }
        if off < 1e-26 {
            break;
        }
    }
    let mut p = best.unwrap().1;
    if p.determinant() < 0.0 {
        p.column_mut(0).neg_mut();
    }
    p
}

fn kak_core(u: &CMatrix) -> Core {
    let det = u.determinant();
    let us = u * Complex64::from_polar(1.0, -det.arg() / 4.0);
    let b = magic();
    let up = b.adjoint() * &us * &b;
    let m2 = up.transpose() * &up;
    let p = orthogonal_diagonaliser(&m2);
    let pc = p.map(|x| c(x, 0.0));
    let d = pc.transpose() * &m2 * &pc;
    let mut theta: Vec<f64> = (0..4).map(|i| d[(i, i)].arg() / 2.0).collect();
    let mut k1 = &up * &pc * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, theta.iter().map(|t| Complex64::from_polar(1.0, -t))));
    if k1.determinant().re < 0.0 {
        theta[0] += PI;
        k1.column_mut(0).neg_mut();
    }
    // theta = g + a s_x + b s_y + c s_z with mutually orthogonal ±1 vectors s
    let mut k = [0.0; 3];
    for (axis, slot) in k.iter_mut().enumerate() {
        let s = b.adjoint() * doubled(axis) * &b;
        *slot = (0..4).map(|i| theta[i] * s[(i, i)].re).sum::<f64>() / 4.0;
    }
    let mut core = Core {
        k,
        left: &b * &k1 * b.adjoint(),
        right: &b * pc.transpose() * b.adjoint(),
    };
    canonicalise(&mut core);
    core
}

fn quarter_turn(axis: usize) -> CMatrix {
    // exp(-i π/4 σ): cyclically permutes the other two axes
    let s = std::f64::consts::FRAC_1_SQRT_2;
    identity(2) * c(s, 0.0) - &paulis()[axis] * c(0.0, s)
}

fn canonicalise(core: &mut Core) {
    let id = identity(2);
    let shift = |core: &mut Core, axis: usize, n: i64| {
        core.k[axis] -= n as f64 * FRAC_PI_2;
        if n.rem_euclid(2) == 1 {
            core.right = doubled(axis) * &core.right;
        }
    };
    let swap = |core: &mut Core, p: usize, q: usize| {
        let r = 3 - p - q;
        let qq = kron(&quarter_turn(r), &quarter_turn(r));
        core.left = &core.left * qq.adjoint();
        core.right = &qq * &core.right;
        core.k.swap(p, q);
    };
    let flip = |core: &mut Core, p: usize, q: usize| {
        let r = 3 - p - q;
        let f = kron(&paulis()[r], &id);
        core.left = &core.left * &f;
        core.right = &f * &core.right;
        core.k[p] = -core.k[p];
        core.k[q] = -core.k[q];
    };

    for axis in 0..3 {
        let n = (core.k[axis] / FRAC_PI_2).round() as i64;
        shift(core, axis, n);
    }
    for _ in 0..3 {
        for i in 0..2 {
            if core.k[i].abs() < core.k[i + 1].abs() {
                swap(core, i, i + 1);
            }
        }
    }
    if core.k[0] < 0.0 && core.k[1] < 0.0 {
        flip(core, 0, 1);
    } else if core.k[0] < 0.0 {
        flip(core, 0, 2);
    } else if core.k[1] < 0.0 {
        flip(core, 1, 2);
    }
    if core.k[0] > FRAC_PI_4 - 1e-13 && core.k[2] < 0.0 {
        shift(core, 0, 1);
        flip(core, 0, 2);
    }
}

fn emit_locals(circ: &mut Circuit, l0: &CMatrix, l1: &CMatrix) -> Result<(), SynthError> {
    push_zyz(circ, &zyz(&unitarise(l0))?, 0);
    push_zyz(circ, &zyz(&unitarise(l1))?, 1);
    Ok(())
}

/// Remove the scalar left over from tensor factorisation.
fn unitarise(a: &CMatrix) -> CMatrix {
    let det = a.determinant();
    a * c(1.0 / det.norm().sqrt(), 0.0)
}

fn split(m: &CMatrix) -> Result<(CMatrix, CMatrix), SynthError> {
    factor_kron(m, 2, 2)
        .map(|(a, b)| (unitarise(&a), unitarise(&b)))
        .ok_or_else(|| SynthError::InvalidGate("local factor is not a tensor product".into()))
}

fn finish(mut circ: Circuit, u: &CMatrix) -> Circuit {
    circ.simplify();
    circ.fix_phase_to(u);
    circ
}

pub fn kak(u: &CMatrix) -> Result<KakDecomposition, SynthError> {
    check_unitary(u, 4, 1e-10)?;
    let core = kak_core(u);
    let (a1, a2) = split(&core.left)?;
    let (b1, b2) = split(&core.right)?;
    let [ka, kb, kc] = core.k;
    // tight enough that a shortcut never costs the 1e-8 reconstruction budget
    let ok = |circ: &Circuit| phase_distance(&circ.unitary(), u) < 5e-9;

    let mut best: Option<Circuit> = None;
    match cnot_class(core.k) {
        0 => {
            let mut circ = Circuit::new(2);
            let (l0, l1) = split(&(&core.left * &core.right))?;
            emit_locals(&mut circ, &l0, &l1)?;
            let circ = finish(circ, u);
            if ok(&circ) {
                best = Some(circ);
            }
        }
        1 => {
            let cx = cx_matrix(0, 1, 2);
            let cc = kak_core(&cx);
            let (r0, r1) = split(&(cc.right.adjoint() * &core.right))?;
            let (l0, l1) = split(&(&core.left * cc.left.adjoint()))?;
            let mut circ = Circuit::new(2);
            emit_locals(&mut circ, &r0, &r1)?;
            circ.push(Gate::cx(0, 1));
            emit_locals(&mut circ, &l0, &l1)?;
            let circ = finish(circ, u);
            if ok(&circ) {
                best = Some(circ);
            }
        }
        _ => {}
    }
    let circuit = match best {
        Some(c) => c,
        None => {
            // N(a,b,c) ∝ (I⊗Rz(π/2)) CX10 (Rz(π/2-2c)⊗Ry(2a-π/2)) CX01 (I⊗Ry(π/2-2b)) CX10 (Rz(-π/2)⊗I)
            let mut circ = Circuit::new(2);
            emit_locals(&mut circ, &(rotation_z(-FRAC_PI_2) * &b1), &b2)?;
            circ.push(Gate::cx(1, 0));
            circ.push(Gate::ry(1, FRAC_PI_2 - 2.0 * kb));
            circ.push(Gate::cx(0, 1));
            circ.push(Gate::rz(0, FRAC_PI_2 - 2.0 * kc));
            circ.push(Gate::ry(1, 2.0 * ka - FRAC_PI_2));
            circ.push(Gate::cx(1, 0));
            emit_locals(&mut circ, &a1, &(&a2 * rotation_z(FRAC_PI_2)))?;
            finish(circ, u)
        }
    };
    let rec = kron(&a1, &a2) * canonical_gate(ka, kb, kc) * kron(&b1, &b2);
    let global_phase = trace_product(&rec.adjoint(), u).arg();
    Ok(KakDecomposition {
        k_vector: core.k.map(|x| x + 0.0),
        locals: [a1, a2, b1, b2],
        global_phase,
        circuit,
    })
}
