use metrology_core::linalg::*;
use metrology_core::povm::*;
use metrology_core::probe::ProbeModel;
use metrology_core::sim::*;
use metrology_core::synth::*;
use nalgebra::Matrix2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn ket0() -> CMatrix {
    diag(&[1.0, 0.0])
}

fn x_gate() -> Circuit {
    let mut c = Circuit::new(1);
    c.push(Gate::ry(0, std::f64::consts::PI));
    c
}

fn random_circuit(width: usize, len: usize, rng: &mut ChaCha20Rng) -> Circuit {
    let mut c = Circuit::new(width);
    for _ in 0..len {
        let q = rng.random_range(0..width);
        match rng.random_range(0..3) {
            0 => c.push(Gate::rz(q, rng.random_range(-3.0..3.0))),
            1 => c.push(Gate::ry(q, rng.random_range(-3.0..3.0))),
            _ if width > 1 => {
                let t = (q + rng.random_range(1..width)) % width;
                c.push(Gate::cx(q, t));
            }
            _ => c.push(Gate::ry(q, 0.3)),
        }
    }
    c
}

fn random_state(d: usize, rng: &mut ChaCha20Rng) -> CMatrix {
    let g = haar_unitary(d, rng) * diag(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
    let r = &g * g.adjoint();
    &r / r.trace()
}

#[test]
fn evolve_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let rho = random_state(4, &mut rng);
    let out = evolve(&rho, &Circuit::new(2), &NoiseModel::profile("high").unwrap()).unwrap();
    assert_eq!(out, rho);

    let out = evolve(&ket0(), &x_gate(), &NoiseModel::ideal()).unwrap();
    assert!((out - diag(&[0.0, 1.0])).norm() < 1e-15);

    for p in [0.01, 0.2, 1.0] {
        let out = evolve(&ket0(), &x_gate(), &NoiseModel::new(p, 0.0, 0.0).unwrap()).unwrap();
        let bloch_z = (out[(0, 0)] - out[(1, 1)]).re;
        assert!((bloch_z.abs() - (1.0 - p)).abs() < 1e-14);
    }

    assert!(matches!(
        evolve(&identity(2), &Circuit::new(2), &NoiseModel::ideal()),
        Err(SimError::DimensionMismatch { expected: 4, got: 2 })
    ));
    assert!(NoiseModel::new(1.5, 0.0, 0.0).is_err());
    assert!(NoiseModel::profile("medium").is_err());
}

#[test]
fn outcome_examples() {
    let rho = diag(&[0.75, 0.25]);
    let d = outcome_probs(&rho, &Circuit::new(1), &NoiseModel::ideal()).unwrap();
    assert_eq!(d.probabilities, vec![0.75, 0.25]);
    assert_eq!(d.label(1), "1");
    let d = outcome_probs(&rho, &Circuit::new(1), &NoiseModel::new(0.0, 0.0, 0.1).unwrap()).unwrap();
    assert!((d.get(0) - 0.7).abs() < 1e-15 && (d.get(1) - 0.3).abs() < 1e-15);
}

fn compiled(povm: &Povm) -> (Circuit, usize) {
    let basis = naimark_unitary(povm).unwrap();
    let u = basis_to_unitary(&basis).unwrap();
    let circ = compile(&u).unwrap();
    let extra = circ.width - povm.copies;
    (circ, extra)
}

#[test]
fn compiled_two_copy_fisher() {
    let model = ProbeModel::new(0.5, 2).unwrap();
    let povm = optimize_collective(&model, 0.5, &OptimizeOptions::default()).unwrap();
    let (circ, extra) = compiled(&povm);
    let der = model.derivatives();
    let (dist, dp) = outcome_gradients(
        &pad_ancillas(&der.state, extra),
        [&pad_ancillas(&der.d_theta_x, extra), &pad_ancillas(&der.d_theta_y, extra)],
        &circ,
        &NoiseModel::ideal(),
    )
    .unwrap();
    let (j, _) = fisher_from_probabilities(&dist.probabilities, &dp);
    let trace = j.try_inverse().unwrap().trace();
    assert!((trace - 6.5).abs() <= 0.03, "{trace}");
    let direct = classical_fisher(&povm, &model).unwrap().weighted_crb(&Matrix2::identity());
    assert!((trace - direct).abs() < 1e-8);
}

#[test]
fn compiled_povm_statistics_match() {
    let mut cases = Vec::new();
    for (m, w) in [(2, 0.5), (2, 0.8), (3, 0.5)] {
        let model = ProbeModel::new(0.5, m).unwrap();
        cases.push((model, optimize_collective(&model, w, &OptimizeOptions::default()).unwrap()));
    }
    let model = ProbeModel::new(0.3, 2).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    cases.push((model, Povm::from_basis(&haar_unitary(4, &mut rng))));
    for (model, povm) in cases {
        let (circ, extra) = compiled(&povm);
        for theta in [(0.0, 0.0), (0.1, -0.15)] {
            let rho = model.state_at(theta.0, theta.1);
            let d = outcome_probs(&pad_ancillas(&rho, extra), &circ, &NoiseModel::ideal()).unwrap();
            let direct = povm.probabilities(&rho);
            assert_eq!(d.len(), direct.len());
            for (a, b) in d.probabilities.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn noiseless_synthesised_circuit_matches_target() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for d in [2, 4, 8] {
        let u = haar_unitary(d, &mut rng);
        let circ = compile(&u).unwrap();
        let rho = random_state(d, &mut rng);
        let out = evolve(&rho, &circ, &NoiseModel::ideal()).unwrap();
        assert!((out - &u * &rho * u.adjoint()).norm() <= 1e-8);
    }
}

#[test]
fn sampling_examples() {
    let certain = OutcomeDistribution {
        width: 1,
        probabilities: vec![1.0, 0.0],
    };
    assert_eq!(sample(&certain, 512, 7), vec![512, 0]);

    let d = OutcomeDistribution {
        width: 1,
        probabilities: vec![0.75, 0.25],
    };
    assert_eq!(sample(&d, 1000, 3), sample(&d, 1000, 3));
    let counts = sample(&d, 1_000_000, 11);
    let f = counts[0] as f64 / 1e6;
    assert!((f - 0.75).abs() <= 0.0013, "{f}");

    let d = OutcomeDistribution {
        width: 3,
        probabilities: vec![0.1, 0.2, 0.0, 0.3, 0.05, 0.05, 0.25, 0.05],
    };
    let counts = sample(&d, 10_000, 5);
    assert_eq!(counts.iter().sum::<u64>(), 10_000);
    assert_eq!(counts[2], 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn channels_preserve_states(seed in 0u64..10_000, g1 in 0.0f64..1.0, g2 in 0.0f64..1.0, ro in 0.0f64..0.5, width in 1usize..=3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let circ = random_circuit(width, 12, &mut rng);
        let rho = random_state(1 << width, &mut rng);
        let noise = NoiseModel::new(g1, g2, ro).unwrap();
        let out = evolve(&rho, &circ, &noise).unwrap();
        prop_assert!((out.trace() - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
        prop_assert!(hermiticity_defect(&out) <= 1e-10);
        let eig = herm_eig(&((&out + out.adjoint()) * Complex64::new(0.5, 0.0))).unwrap();
        prop_assert!(eig.eigenvalues.iter().all(|&x| x >= -1e-10));
        let d = outcome_probs(&rho, &circ, &noise).unwrap();
        prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(d.probabilities.iter().all(|&p| p >= 0.0));
    }
}
