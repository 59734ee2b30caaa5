//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use metrology_core::bounds::{closed_form, holevo_sdp, lw_margin, nagaoka_hayashi_sdp};
use metrology_core::infer::Scheme;
use metrology_core::linalg::haar_unitary;
use metrology_core::povm::{classical_fisher, optimize_collective, OptimizeOptions};
use metrology_core::probe::ProbeModel;
use metrology_core::sim::NoiseModel;
use metrology_core::synth::{kak, reconstruction_error, synth_threequbit, zyz};
use metrology_harness::commands::{cmd_simulate, cmd_sweep};
use metrology_harness::config::{Axis, EstimatorMode, NoiseSpec, ThetaGrid};
use metrology_harness::pipeline::{Experiment, SchemeSetup};
use metrology_harness::ExperimentConfig;
use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn eps_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn closed_forms() -> Outcome {
    let c = closed_form(0.5).map_err(fail)?;
    if (c.n1, c.n2, c.holevo) != (16.0, 6.5, 12.0) {
        return Err(format!("ε=0.5 gives {} / {} / {}", c.n1, c.n2, c.holevo));
    }
    for eps in eps_grid() {
        let c = closed_form(eps).map_err(fail)?;
        let s = (1.0 - eps) * (1.0 - eps);
        let want = [4.0 / s, (4.0 - 2.0 * eps + eps * eps) / (2.0 * s), (4.0 - 2.0 * eps) / s];
        if [c.n1, c.n2, c.holevo].iter().zip(want).any(|(g, w)| rel(*g, w) > 1e-15) {
            return Err(format!("ε={eps} disagrees with the formulas"));
        }
        let (h, n2, n1) = (c.holevo, 2.0 * c.n2, c.n1);
        let ordered = if eps == 0.0 { h == n2 && n2 == n1 } else { h < n2 && n2 < n1 };
        if !ordered {
            return Err(format!("hierarchy broken at ε={eps}: {h} {n2} {n1}"));
        }
    }
    Ok("10 grid points, ε=0.5 gives 16 / 6.5 / 12, equality only at ε=0".into())
}

fn sdp_oracle() -> Outcome {
    let w = Matrix2::identity();
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let c = closed_form(eps).map_err(fail)?;
        let m1 = nagaoka_hayashi_sdp(&ProbeModel::new(eps, 1).map_err(fail)?, &w).map_err(fail)?;
        let m2 = nagaoka_hayashi_sdp(&ProbeModel::new(eps, 2).map_err(fail)?, &w).map_err(fail)?;
        let h = holevo_sdp(&ProbeModel::new(eps, 1).map_err(fail)?, &w).map_err(fail)?;
        for d in [rel(m1.value, c.n1), rel(m2.value, c.n2), rel(h.value, c.holevo)] {
            worst = worst.max(d);
        }
    }
    check(worst <= 1e-5, format!("max relative deviation {worst:.1e} (tolerance 1e-5)"))
}

fn three_copy_bound() -> Outcome {
    let c = closed_form(0.5).map_err(fail)?;
    let n3 = nagaoka_hayashi_sdp(&ProbeModel::new(0.5, 3).map_err(fail)?, &Matrix2::identity())
        .map_err(fail)?
        .value;
    let scaled = [c.n1, 2.0 * c.n2, 3.0 * n3];
    let gaps: Vec<f64> = scaled.iter().map(|s| 1.0 - c.holevo / s).collect();
    let ok = (12.0..=13.0).contains(&scaled[2])
        && (gaps[0] - 0.25).abs() < 1e-9
        && (gaps[1] - 1.0 / 13.0).abs() < 1e-9
        && gaps[2] < gaps[1];
    check(
        ok,
        format!("3·N3 = {:.4}, gaps {:.4} {:.4} {:.4}", scaled[2], gaps[0], gaps[1], gaps[2]),
    )
}

fn povm_optimality() -> Outcome {
    let model = ProbeModel::new(0.5, 2).map_err(fail)?;
    let povm = optimize_collective(&model, 0.5, &OptimizeOptions::default()).map_err(fail)?;
    let crb = classical_fisher(&povm, &model).map_err(fail)?.weighted_crb(&Matrix2::identity());
    let sdp = nagaoka_hayashi_sdp(&model, &Matrix2::identity()).map_err(fail)?.value;
    check(
        rel(crb, 6.5) <= 5e-3 && crb >= sdp - 1e-6,
        format!("Tr J^-1 = {crb:.6}, SDP bound {sdp:.6}"),
    )
}

fn compilation() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 3];
    let mut max_cx = 0;
    for _ in 0..200 {
        let u = haar_unitary(2, &mut rng);
        let e = zyz(&u).map_err(fail)?;
        worst[0] = worst[0].max((e.matrix() - &u).norm());
        let u = haar_unitary(4, &mut rng);
        let k = kak(&u).map_err(fail)?;
        worst[1] = worst[1].max(reconstruction_error(&k.circuit, &u));
        max_cx = max_cx.max(k.circuit.cx_count());
        let u = haar_unitary(8, &mut rng);
        worst[2] = worst[2].max(reconstruction_error(&synth_threequbit(&u).map_err(fail)?, &u));
    }

    // compiled measurements against their abstract statistics
    let mut born: f64 = 0.0;
    for scheme in [Scheme::Two, Scheme::Three] {
        let cfg = ExperimentConfig {
            scheme,
            ..ExperimentConfig::default()
        };
        let setup = SchemeSetup::build(&cfg, &NoiseModel::ideal()).map_err(fail)?;
        let povm = setup.povm.as_ref().ok_or("no measurement")?;
        for theta in [(0.0, 0.0), (0.13, -0.07), (-0.2, 0.2)] {
            let sim = &setup.distributions(theta, &NoiseModel::ideal()).map_err(fail)?[0];
            let abs = povm.probabilities(&setup.model.state_at(theta.0, theta.1));
            for (k, p) in sim.iter().enumerate() {
                born = born.max((p - abs.get(k).copied().unwrap_or(0.0)).abs());
            }
        }
    }
    let ok = worst[0] <= 1e-10 && worst[1] <= 1e-8 && worst[2] <= 1e-7 && max_cx <= 3 && born <= 1e-8;
    check(
        ok,
        format!(
            "errors {:.1e} / {:.1e} / {:.1e}, max {max_cx} CX on two qubits, Born deviation {born:.1e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn noiseless(scheme: Scheme) -> Result<metrology_harness::report::Report, String> {
    let cfg = ExperimentConfig {
        scheme,
        ..ExperimentConfig::default()
    };
    Ok(cmd_simulate(&cfg).map_err(fail)?.report)
}

fn monte_carlo(single: &metrology_harness::report::Report, two: &metrology_harness::report::Report) -> Outcome {
    let (s, t) = (&single.analysis.raw, &two.analysis.raw);
    let improvement: f64 = 1.0 - 13.0 / 16.0;
    let excess: f64 = 13.0 / 12.0 - 1.0;
    let ok = (s.scaled_mse - 16.0).abs() <= 2.0 * s.bootstrap_std
        && (t.scaled_mse - 13.0).abs() <= 2.0 * t.bootstrap_std
        && (improvement - 0.1875).abs() < 1e-15
        && (0.15..=0.23).contains(&improvement)
        && (0.02..=0.10).contains(&excess);
    check(
        ok,
        format!(
            "single {:.2} ± {:.2}, two {:.2} ± {:.2}, improvement {:.2}%, excess over Holevo {:.1}%",
            s.scaled_mse,
            s.bootstrap_std,
            t.scaled_mse,
            t.bootstrap_std,
            100.0 * improvement,
            100.0 * excess
        ),
    )
}

fn lw_violation(single: &metrology_harness::report::Report, two: &metrology_harness::report::Report) -> Outcome {
    let margin = |r: &metrology_harness::report::Report| -> Result<(f64, f64), String> {
        let s = &r.analysis.raw;
        let m = s.lw_margin.ok_or("margin missing")?;
        if (m - lw_margin(s.v_x, s.v_y, 0.5)).abs() > 1e-12 {
            return Err(format!("reported margin {m} disagrees with its variances"));
        }
        Ok((m, s.lw_margin_std.ok_or("margin std missing")?))
    };
    let (m2, s2) = margin(two)?;
    let (m1, s1) = margin(single)?;
    check(
        m2 >= 3.0 * s2 && m1 <= 2.0 * s1,
        format!(
            "two-copy margin {m2:.4} ± {s2:.4} ({:.1}σ), single-copy {m1:.4} ± {s1:.4} ({:.1}σ)",
            m2 / s2,
            m1 / s1
        ),
    )
}

fn chisq(two: &metrology_harness::report::Report) -> Outcome {
    let c = two.analysis.raw.chisq.ok_or("χ² check missing")?;
    check(c.pass && c.p_value >= 0.01, format!("KS D = {:.4}, p = {:.3}", c.ks_statistic, c.p_value))
}

fn readout(g: f64, readout: f64) -> NoiseSpec {
    NoiseSpec::Model(NoiseModel {
        gate1_error: g,
        gate2_error: g,
        readout_error: readout,
        name: None,
    })
}

fn mitigation() -> Outcome {
    let cfg = ExperimentConfig {
        noise: readout(0.0, 0.05),
        theta_grid: Some(ThetaGrid {
            points: 11,
            axis: Axis::Square,
            ..ThetaGrid::default()
        }),
        ..ExperimentConfig::default()
    };
    let (rows, _) = cmd_sweep(&cfg).map_err(fail)?;
    let n = rows.len() as f64;
    let avg = |mitigated: bool| {
        let (x, y) = rows
            .iter()
            .filter_map(|r| r.bias(mitigated))
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        (x / n).hypot(y / n)
    };
    let (raw, mit) = (avg(false), avg(true));
    let bound = 2.0 * closed_form(0.5).map_err(fail)?.n2;
    let mut floor = f64::INFINITY;
    for r in &rows {
        let m = r.analysis.mitigated.as_ref().ok_or("mitigation missing")?;
        floor = floor.min(m.scaled_mse + 3.0 * m.bootstrap_std);
    }
    check(
        mit * 5.0 <= raw && floor >= bound,
        format!(
            "{} points, mean bias {raw:.5} raw vs {mit:.5} mitigated ({:.1}x), min(mitigated + 3σ) {floor:.2} vs {bound}",
            rows.len(),
            raw / mit
        ),
    )
}

fn noisy_ordering() -> Outcome {
    let run = |scheme, g| -> Result<f64, String> {
        let mut cfg = ExperimentConfig {
            scheme,
            noise: readout(g, 0.0),
            estimator: EstimatorMode::NoiseAware,
            ..ExperimentConfig::default()
        };
        cfg.mitigation.enabled = false;
        let exp = Experiment::new(&cfg).map_err(fail)?;
        Ok(metrology_harness::commands::simulate_with(&exp).map_err(fail)?.report.analysis.raw.scaled_mse)
    };
    let two = run(Scheme::Two, 5e-3)?;
    let three = run(Scheme::Three, 5e-3)?;
    let quiet = run(Scheme::Two, 1e-3)?;
    check(
        three > two && quiet < 16.0,
        format!("gate error 5e-3: three {three:.2} vs two {two:.2}; 1e-3: two {quiet:.2} vs 16"),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n}: {tag} {name}: {detail} [{secs:.1}s]");
    };
    report(1, "closed forms", &mut closed_forms);
    report(2, "SDP oracle", &mut sdp_oracle);
    report(3, "three-copy bound", &mut three_copy_bound);
    report(4, "measurement optimality", &mut povm_optimality);
    report(5, "compilation", &mut compilation);

    let reports = noiseless(Scheme::Single).and_then(|s| Ok((s, noiseless(Scheme::Two)?)));
    let shared = |f: &dyn Fn(&_, &_) -> Outcome| match &reports {
        Ok((s, t)) => f(s, t),
        Err(e) => Err(e.clone()),
    };
    report(6, "Monte-Carlo MSE", &mut || shared(&monte_carlo));
    report(7, "LW violation", &mut || shared(&lw_violation));
    report(8, "chi-squared shape", &mut || shared(&|_, t| chisq(t)));
    report(9, "readout mitigation", &mut mitigation);
    report(10, "noisy ordering", &mut noisy_ordering);

    if failed == 0 {
        println!("all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 10 criteria fail");
        ExitCode::FAILURE
    }
}
