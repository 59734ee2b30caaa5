use metrology_core::linalg::*;
use metrology_core::synth::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_locals(rng: &mut ChaCha20Rng) -> CMatrix {
    kron(&haar_unitary(2, rng), &haar_unitary(2, rng))
}

#[test]
fn random_unitaries_round_trip() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let u = haar_unitary(2, &mut rng);
        let e = zyz(&u).unwrap();
        assert!((e.matrix() - &u).norm() < 1e-10);
        assert!((0.0..=std::f64::consts::PI).contains(&e.beta));
        let circ = compile(&u).unwrap();
        assert!(reconstruction_error(&circ, &u) <= 1e-10);
    }
    for _ in 0..200 {
        let u = haar_unitary(4, &mut rng);
        let k = kak(&u).unwrap();
        assert!(reconstruction_error(&k.circuit, &u) <= 1e-8);
        assert!(k.circuit.cx_count() <= 3);
        k.circuit.validate().unwrap();
        let [a, b, z] = k.k_vector;
        assert!(FRAC_PI_4 + 1e-12 >= a && a + 1e-12 >= b && b + 1e-12 >= z.abs());
    }
    for _ in 0..200 {
        let u = haar_unitary(8, &mut rng);
        let circ = synth_threequbit(&u).unwrap();
        assert!(reconstruction_error(&circ, &u) <= 1e-7);
        assert!(unitary_overlap(&circ.unitary(), &u) >= 1.0 - 1e-7);
        circ.validate().unwrap();
    }
}

#[test]
fn zyz_examples() {
    let e = zyz(&identity(2)).unwrap();
    for x in [e.alpha, e.beta, e.gamma, e.phase] {
        assert!(x.abs() < 1e-15);
    }
    let u = rotation_z(0.3) * rotation_y(0.5) * rotation_z(0.7);
    let e = zyz(&u).unwrap();
    for (got, want) in [(e.alpha, 0.3), (e.beta, 0.5), (e.gamma, 0.7), (e.phase, 0.0)] {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    let bad = CMatrix::from_element(2, 2, c(1.0, 0.0));
    assert!(matches!(zyz(&bad), Err(SynthError::NotUnitary(_))));
}

fn kak_reconstruction(k: &KakDecomposition) -> CMatrix {
    let [a1, a2, b1, b2] = &k.locals;
    kron(a1, a2) * canonical_gate(k.k_vector[0], k.k_vector[1], k.k_vector[2]) * kron(b1, b2)
        * Complex64::from_polar(1.0, k.global_phase)
}

#[test]
fn kak_examples() {
    let k = kak(&identity(4)).unwrap();
    assert!(k.k_vector.iter().all(|x| x.abs() < 1e-14));
    assert_eq!(k.circuit.cx_count(), 0);
    assert!(k.circuit.gates.is_empty());

    let cx = cx_matrix(0, 1, 2);
    let k = kak(&cx).unwrap();
    for (got, want) in k.k_vector.iter().zip([FRAC_PI_4, 0.0, 0.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((kak_reconstruction(&k) - &cx).norm() < 1e-10);
    assert_eq!(cnot_class(k.k_vector), 1);
    assert_eq!(k.circuit.cx_count(), 1);

    let mut swap = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        swap[(i, j)] = c(1.0, 0.0);
    }
    let k = kak(&swap).unwrap();
    for x in k.k_vector {
        assert!((x - FRAC_PI_4).abs() < 1e-12);
    }
    assert!((kak_reconstruction(&k) - &swap).norm() < 1e-10);
    assert_eq!(k.circuit.cx_count(), 3);
}

#[test]
fn kak_locals_reconstruct_random() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..50 {
        let u = haar_unitary(4, &mut rng);
        let k = kak(&u).unwrap();
        assert!((kak_reconstruction(&k) - &u).norm() < 1e-9);
    }
}

#[test]
fn k_vector_is_local_invariant() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for _ in 0..50 {
        let u = haar_unitary(4, &mut rng);
        let dressed = random_locals(&mut rng) * &u * random_locals(&mut rng);
        let (a, b) = (kak(&u).unwrap().k_vector, kak(&dressed).unwrap().k_vector);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn cnot_count_classes() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let dressed_cx = random_locals(&mut rng) * cx_matrix(1, 0, 2) * random_locals(&mut rng);
    let k = kak(&dressed_cx).unwrap();
    assert_eq!(k.circuit.cx_count(), 1);
    assert!(reconstruction_error(&k.circuit, &dressed_cx) <= 1e-8);

    let local = random_locals(&mut rng);
    let k = kak(&local).unwrap();
    assert_eq!(k.circuit.cx_count(), 0);
    assert!(reconstruction_error(&k.circuit, &local) <= 1e-8);

    assert_eq!(cnot_class([0.5, 0.2, 0.0]), 2);
    assert_eq!(cnot_class([0.5, 0.2, 0.1]), 3);
}

#[test]
fn threequbit_examples() {
    let circ = synth_threequbit(&identity(8)).unwrap();
    assert!(circ.gates.is_empty());

    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let u = kron(
        &kron(&haar_unitary(2, &mut rng), &haar_unitary(2, &mut rng)),
        &haar_unitary(2, &mut rng),
    );
    let circ = synth_threequbit(&u).unwrap();
    assert_eq!(circ.cx_count(), 0);
    assert!(reconstruction_error(&circ, &u) <= 1e-9);

    // permutation matrices have fully degenerate cosine-sine structure
    let mut toffoli = identity(8);
    toffoli[(6, 6)] = c(0.0, 0.0);
    toffoli[(7, 7)] = c(0.0, 0.0);
    toffoli[(6, 7)] = c(1.0, 0.0);
    toffoli[(7, 6)] = c(1.0, 0.0);
    let circ = synth_threequbit(&toffoli).unwrap();
    assert!(reconstruction_error(&circ, &toffoli) <= 1e-7);
}

fn bell_basis() -> CMatrix {
    let h = FRAC_1_SQRT_2;
    // columns: Φ+, Φ-, Ψ+, Ψ-
    CMatrix::from_row_slice(
        4,
        4,
        &[
            c(h, 0.0), c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0), c(h, 0.0),
            c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0), c(-h, 0.0),
            c(h, 0.0), c(-h, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        ],
    )
}

#[test]
fn basis_to_unitary_examples() {
    assert!((basis_to_unitary(&identity(4)).unwrap() - identity(4)).norm() == 0.0);

    let bell = bell_basis();
    let u = basis_to_unitary(&bell).unwrap();
    for k in 0..4 {
        let image = &u * bell.column(k);
        for j in 0..4 {
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((image[j] - c(want, 0.0)).norm() < 1e-14);
        }
    }
    let circ = compile(&u).unwrap();
    assert!(reconstruction_error(&circ, &u) <= 1e-8);

    let mut skew = identity(2);
    skew[(0, 1)] = c(0.1, 0.0);
    assert!(matches!(basis_to_unitary(&skew), Err(SynthError::NotOrthonormal(_))));
}

#[test]
fn born_probabilities_match_projectors() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for d in [2, 4, 8] {
        for _ in 0..20 {
            let basis = haar_unitary(d, &mut rng);
            let g = haar_unitary(d, &mut rng) * diag(&(0..d).map(|k| (k + 1) as f64).collect::<Vec<_>>());
            let rho = &g * g.adjoint();
            let rho = &rho / rho.trace();
            let u = basis_to_unitary(&basis).unwrap();
            let rotated = &u * &rho * u.adjoint();
            for k in 0..d {
                let b = basis.column(k);
                let direct = (b.adjoint() * &rho * b)[(0, 0)].re;
                assert!((rotated[(k, k)].re - direct).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn waveplate_examples() {
    let s = waveplates(&identity(2)).unwrap();
    for x in [s.q1_angle, s.h_angle, s.q2_angle] {
        assert!(x.abs() < 1e-12, "{s:?}");
    }

    let target = WaveplateSetting {
        q1_angle: 10.0,
        h_angle: 35.0,
        q2_angle: -20.0,
    };
    let u = target.jones();
    let s = waveplates(&u).unwrap();
    assert!(phase_distance(&s.jones(), &u) < 1e-8);

    // measuring σx: map (|0> ± |1>)/√2 to |0>, |1>
    let h = FRAC_1_SQRT_2;
    let plus_minus = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]);
    let u = basis_to_unitary(&plus_minus).unwrap();
    let j = waveplates(&u).unwrap().jones();
    for k in 0..2 {
        let image = &j * plus_minus.column(k);
        assert!((image[k].norm() - 1.0).abs() < 1e-8);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for _ in 0..200 {
        let u = haar_unitary(2, &mut rng);
        let s = waveplates(&u).unwrap();
        assert!(phase_distance(&s.jones(), &u) < 1e-8);
        for x in [s.q1_angle, s.h_angle, s.q2_angle] {
            assert!((-90.0..=90.0).contains(&x));
        }
    }
}

#[test]
fn circuit_formats() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let u = haar_unitary(4, &mut rng);
    let circ = kak(&u).unwrap().circuit;
    let back = Circuit::from_json(&circ.to_json()).unwrap();
    assert_eq!(back, circ);

    let text = circ.to_text();
    assert_eq!(text.lines().count(), circ.gates.len());
    assert!(text.lines().any(|l| l.starts_with("cx ")));
    for line in text.lines().filter(|l| !l.starts_with("cx")) {
        let angle: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert!(angle.is_finite());
    }

    let doc = r#"{"width": 2, "global_phase": 0.0, "gates": [{"name": "cx", "qubits": [1, 1]}]}"#;
    assert!(matches!(Circuit::from_json(doc), Err(SynthError::InvalidGate(_))));
    let doc = r#"{"width": 2, "global_phase": 0.0, "gates": [{"name": "ry", "qubits": [2], "angle": 0.1}]}"#;
    assert!(Circuit::from_json(doc).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zyz_round_trip(a in -3.0f64..3.0, b in 0.01f64..3.1, g in -3.0f64..3.0, ph in -3.0f64..3.0) {
        let u = rotation_z(a) * rotation_y(b) * rotation_z(g) * Complex64::from_polar(1.0, ph);
        let e = zyz(&u).unwrap();
        prop_assert!((e.matrix() - &u).norm() < 1e-10);
    }

    #[test]
    fn chamber_points_are_fixed(a in 0.01f64..0.78, fb in 0.01f64..0.99, fc in -0.99f64..0.99, seed in 0u64..1000) {
        let b = a * fb;
        let z = b * fc;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let u = random_locals(&mut rng) * canonical_gate(a, b, z) * random_locals(&mut rng);
        let k = kak(&u).unwrap();
        for (got, want) in k.k_vector.iter().zip([a, b, z]) {
            prop_assert!((got - want).abs() < 1e-9, "{:?} vs {:?}", k.k_vector, (a, b, z));
        }
        prop_assert!(reconstruction_error(&k.circuit, &u) <= 1e-8);
    }
}
