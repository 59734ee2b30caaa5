use metrology_core::infer::Scheme;
use metrology_harness::config::*;
use metrology_harness::{ExperimentConfig, HarnessError};

#[test]
fn defaults_follow_the_protocol() {
    let cfg = ExperimentConfig::from_toml("").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.runs, 400);
    assert_eq!(cfg.shots(), 512);
    assert_eq!(cfg.weight_w, 0.5);
    assert_eq!(cfg.mitigation.points, 30);
    assert_eq!(cfg.mitigation.range, 0.2);
    assert_eq!(cfg.mitigation.recalib_every, 40);
    assert!(cfg.noise.resolve().unwrap().is_noiseless());

    let three = ExperimentConfig::from_toml("scheme = \"three\"").unwrap();
    assert_eq!(three.shots(), 341);
}

#[test]
fn dotted_keys_and_profiles() {
    let cfg = ExperimentConfig::from_toml(
        "epsilon = 0.3\nscheme = \"single\"\ntheta_true = [0.05, -0.1]\nnoise.readout_error = 0.05\n\
         mitigation.points = 12\nmitigation.model = \"affine\"\nestimator = \"noise_aware\"\n",
    )
    .unwrap();
    assert_eq!(cfg.scheme, Scheme::Single);
    assert_eq!(cfg.theta_true, (0.05, -0.1));
    let noise = cfg.noise.resolve().unwrap();
    assert_eq!((noise.gate1_error, noise.gate2_error, noise.readout_error), (0.0, 0.0, 0.05));
    assert_eq!(cfg.mitigation.points, 12);
    assert_eq!(cfg.mitigation.model, MitigationKind::Affine);
    assert_eq!(cfg.estimator, EstimatorMode::NoiseAware);

    let cfg = ExperimentConfig::from_toml("noise = \"high\"").unwrap();
    assert_eq!(cfg.noise.resolve().unwrap().gate2_error, 5e-2);
}

fn config_error(text: &str) -> HarnessError {
    let e = ExperimentConfig::from_toml(text).unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
    e
}

#[test]
fn rejects_unknown_keys_and_bad_values() {
    config_error("epsilon = 0.5\nshots = 512");
    config_error("mitigation.point = 30");
    config_error("noise.gate_error = 0.01");
    config_error("noise = \"medium\"");
    config_error("epsilon = 1.0");
    config_error("weight_w = 0.0");
    config_error("runs = 1");
    config_error("scheme = \"four\"");
    config_error("theta_true = [0.3, 0.0]");
    config_error("noise.readout_error = 1.5");
    config_error("[theta_grid]\nfrom = -0.5");
    config_error("mitigation.points = 0");
}

#[test]
fn grids() {
    let g = ThetaGrid::default();
    let v = g.values();
    assert_eq!(v.len(), 9);
    assert_eq!(v[4], 0.0);
    assert_eq!((v[0], v[8]), (-0.2, 0.2));
    let g = ThetaGrid {
        points: 21,
        ..ThetaGrid::default()
    };
    assert_eq!(g.values()[10], 0.0);
    let sq = ThetaGrid {
        points: 3,
        axis: Axis::Square,
        ..ThetaGrid::default()
    };
    let t = sq.thetas((0.0, 0.0));
    assert_eq!(t.len(), 9);
    assert!(t.contains(&(-0.2, 0.2)) && t.contains(&(0.0, 0.0)));
    let x = ThetaGrid {
        points: 3,
        axis: Axis::X,
        ..ThetaGrid::default()
    };
    assert_eq!(x.thetas((0.0, 0.1)), vec![(-0.2, 0.1), (0.0, 0.1), (0.2, 0.1)]);
}

#[test]
fn loads_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "seed = 9\nruns = 50\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!((cfg.seed, cfg.runs), (9, 50));
    assert_eq!(ExperimentConfig::load(&dir.path().join("missing.toml")).unwrap_err().exit_code(), 2);
}
