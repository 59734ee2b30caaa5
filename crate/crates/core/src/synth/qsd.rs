//! Three-qubit synthesis: cosine-sine split on qubit 0, demultiplexing of the
//! block-diagonal factors and Gray-code multiplexed rotations. The 4×4 pieces
//! act on qubits 1 and 2 and go through `kak`.

use num_complex::Complex64;

use super::kak::kak;
use super::oneq::{push_zyz, rotation_y, rotation_z, zyz};
use super::{check_unitary, factor_kron, Circuit, Gate, SynthError};
use crate::linalg::{kron, phase_distance, polar_unitary, svd, CMatrix};

const GRAY: [usize; 4] = [0, 1, 3, 2];

#[derive(Clone, Copy)]
enum Axis {
    Y,
    Z,
}

pub fn synth_threequbit(u: &CMatrix) -> Result<Circuit, SynthError> {
    check_unitary(u, 8, 1e-9)?;
    if let Some(c) = product_circuit(u)? {
        return Ok(c);
    }
    let mut best = decompose(u)?;
    let mut err = phase_distance(&best.unitary(), u);
    // Degenerate cosine-sine structure (singular values of a quadrant at 0 or 1)
    // can cost accuracy; a twist on qubit 0 makes it generic again.
    let mut k = 1;
    while err > 1e-9 && k <= 8 {
        let g = rotation_y(0.61 * k as f64) * rotation_z(1.17 * k as f64);
        let twisted = u * kron(&g, &CMatrix::identity(4, 4));
        let inner = decompose(&twisted)?;
        let mut circ = Circuit::new(3);
        push_zyz(&mut circ, &zyz(&g.adjoint())?, 0);
        circ.append_mapped(&inner, &[0, 1, 2]);
        finish(&mut circ, u);
        let e = phase_distance(&circ.unitary(), u);
        if e < err {
            best = circ;
            err = e;
        }
        k += 1;
    }
    Ok(best)
}

fn finish(circ: &mut Circuit, u: &CMatrix) {
    circ.simplify();
    circ.fix_phase_to(u);
}

fn product_circuit(u: &CMatrix) -> Result<Option<Circuit>, SynthError> {
    let Some((a, bc)) = factor_kron(u, 2, 4) else {
        return Ok(None);
    };
    let Some((b, c)) = factor_kron(&bc, 2, 2) else {
        return Ok(None);
    };
    let mut circ = Circuit::new(3);
    for (q, m) in [a, b, c].iter().enumerate() {
        let det = m.determinant();
        push_zyz(&mut circ, &zyz(&(m / Complex64::new(det.norm().sqrt(), 0.0)))?, q);
    }
    finish(&mut circ, u);
    Ok((phase_distance(&circ.unitary(), u) < 1e-9).then_some(circ))
}

/// Orthonormal `L` and `s ≥ 0` with `a = L diag(s)`, for `a` with orthogonal columns.
fn orthonormal_columns(a: &CMatrix) -> (CMatrix, Vec<f64>) {
    let n = a.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.column(j).norm().total_cmp(&a.column(i).norm()));
    let mut l = CMatrix::zeros(n, n);
    let mut done: Vec<usize> = Vec::new();
    let orth = |v: &mut nalgebra::DVector<Complex64>, l: &CMatrix, done: &[usize]| {
        for _ in 0..2 {
            for &k in done {
                let p = l.column(k).dotc(v);
                *v -= l.column(k) * p;
            }
        }
    };
    for &i in &order {
        let mut v = a.column(i).into_owned();
        orth(&mut v, &l, &done);
        if v.norm() < 1e-10 {
            // complete with the computational vector that survives best
            let mut cand = Vec::new();
            for j in 0..n {
                let mut e = nalgebra::DVector::<Complex64>::zeros(n);
                e[j] = Complex64::new(1.0, 0.0);
                orth(&mut e, &l, &done);
                cand.push(e);
            }
            v = cand.into_iter().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
        }
        let norm = v.norm();
        l.set_column(i, &(v / Complex64::new(norm, 0.0)));
        done.push(i);
    }
    let s = (0..n).map(|i| l.column(i).dotc(&a.column(i)).re.max(0.0)).collect();
    (l, s)
}

/// `diag(l0, l1) = (I ⊗ v) · diag over qubit 0 of Rz(φ_i) · (I ⊗ w)`.
fn demultiplex(l0: &CMatrix, l1: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (q, t) = (l0 * l1.adjoint()).schur().unpack();
    let d: Vec<Complex64> = (0..4).map(|i| t[(i, i)].sqrt()).collect();
    let dm = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
    let w = dm * q.adjoint() * l1;
    let phis = d.iter().map(|z| -2.0 * z.arg()).collect();
    (q, phis, w)
}

/// Rotation on qubit 0 by `angles[i]` when qubits (1, 2) are in state `i`.
fn multiplexor(circ: &mut Circuit, axis: Axis, angles: &[f64]) {
    for k in 0..4 {
        let theta: f64 = (0..4)
            .map(|j| {
                let sign = if (j & GRAY[k]).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * angles[j]
            })
            .sum::<f64>()
            / 4.0;
        circ.push(match axis {
            Axis::Y => Gate::ry(0, theta),
            Axis::Z => Gate::rz(0, theta),
        });
        let changed = GRAY[k] ^ GRAY[(k + 1) % 4];
        circ.push(Gate::cx(if changed == 2 { 1 } else { 2 }, 0));
    }
}

fn two_qubit(circ: &mut Circuit, m: &CMatrix) -> Result<(), SynthError> {
    let k = kak(m)?;
    circ.append_mapped(&k.circuit, &[1, 2]);
    Ok(())
}

fn decompose(u: &CMatrix) -> Result<Circuit, SynthError> {
    let blk = |r: usize, c: usize| u.view((4 * r, 4 * c), (4, 4)).into_owned();
    let (u00, u01, u10, u11) = (blk(0, 0), blk(0, 1), blk(1, 0), blk(1, 1));
    let d = svd(&u00);
    let (l0, r0) = (d.u, d.v.adjoint());
    let cv: Vec<f64> = d.s.iter().map(|x| x.min(1.0)).collect();
    let (l1, sv) = orthonormal_columns(&(&u10 * r0.adjoint()));
    let a = l1.adjoint() * &u11;
    let b = l0.adjoint() * &u01;
    let r1 = polar_unitary(&CMatrix::from_fn(4, 4, |i, j| a[(i, j)] * cv[i] - b[(i, j)] * sv[i]));
    let ry: Vec<f64> = (0..4).map(|i| 2.0 * sv[i].atan2(cv[i])).collect();

    let (vr, phr, wr) = demultiplex(&r0, &r1);
    let (vl, phl, wl) = demultiplex(&l0, &l1);
    let mut circ = Circuit::new(3);
    two_qubit(&mut circ, &wr)?;
    multiplexor(&mut circ, Axis::Z, &phr);
    two_qubit(&mut circ, &vr)?;
    multiplexor(&mut circ, Axis::Y, &ry);
    two_qubit(&mut circ, &wl)?;
    multiplexor(&mut circ, Axis::Z, &phl);
    two_qubit(&mut circ, &vl)?;
    finish(&mut circ, u);
    Ok(circ)
}
