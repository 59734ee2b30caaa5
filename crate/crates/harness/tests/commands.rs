use metrology_core::infer::{RunRecord, Scheme};
use metrology_core::povm::{classical_fisher, Povm};
use metrology_core::probe::ProbeModel;
use metrology_core::sim::{outcome_probs, pad_ancillas, NoiseModel};
use metrology_harness::commands::*;
use metrology_harness::report::{read_runs_csv, write_runs_csv};
use nalgebra::Matrix2;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn bounds_table_rows() {
    let (rows, csv) = cmd_bounds(&[0.0, 0.5], 2).unwrap();
    let r = &rows[1];
    assert_eq!((r.n[0], r.n[1], r.holevo), (16.0, 6.5, 12.0));
    assert!(close(r.gaps[0], 0.25, 1e-15));
    assert!(close(r.gaps[1], 1.0 / 13.0, 1e-12));
    assert!(r.sdp_deviation < 1e-5 && r.status == "ok");
    let r = &rows[0];
    assert_eq!((r.n[0], r.n[1], r.holevo), (4.0, 2.0, 4.0));

    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,sld,n1,n2,holevo,gap_1,gap_2,sdp_deviation,status"
    );
    let second: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(second[2], "1.6000000000000000e1");
    assert_eq!(second[3], "6.5000000000000000e0");

    assert_eq!(cmd_bounds(&[0.97], 2).unwrap_err().exit_code(), 2);
    assert_eq!(cmd_bounds(&[0.5], 0).unwrap_err().exit_code(), 2);
}

#[test]
fn bounds_increase_with_epsilon() {
    let grid: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let (rows, _) = cmd_bounds(&grid, 3).unwrap();
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(b.sld > a.sld && b.holevo > a.holevo);
        for m in 0..3 {
            assert!(b.n[m] > a.n[m], "n{} at {}", m + 1, b.epsilon);
        }
    }
    // 3 N_3 sits between the Holevo bound and 2 N_2
    for r in &rows[1..] {
        assert!(r.holevo < 3.0 * r.n[2] && 3.0 * r.n[2] < 2.0 * r.n[1]);
        assert!(r.gaps[2] < r.gaps[1] && r.gaps[1] < r.gaps[0]);
    }
}

#[test]
fn tradeoff_rows() {
    let (rows, csv) = cmd_tradeoff(0.5, &[0.3, 0.5, 0.7]).unwrap();
    let b = &rows[1];
    assert!(close(b.vx_nagaoka2, 6.5, 1e-5) && close(b.vy_nagaoka2, 6.5, 1e-5));
    assert!(close(b.lw_margin_nagaoka2, 2.0 / 6.5 - 0.25, 1e-5));
    assert!(close(b.vx_holevo, 6.0, 1e-5) && close(b.vy_holevo, 6.0, 1e-5));
    assert!(close(b.vx_nagaoka1, 8.0, 1e-5) && b.lw_margin_nagaoka1.abs() < 1e-6);
    for r in &rows {
        assert!(r.lw_margin_nagaoka1.abs() < 1e-6, "single-copy curve sits on the LW boundary");
        assert!(r.lw_margin_nagaoka2 > 0.05);
        assert_eq!(r.lw_boundary, 0.25);
    }
    // mirror symmetry between the weights
    assert!(close(rows[0].vx_nagaoka2, rows[2].vy_nagaoka2, 1e-5));
    assert!(csv.starts_with("weight,vx_nagaoka1,vy_nagaoka1,lw_margin_nagaoka1,vx_nagaoka2,vy_nagaoka2,lw_margin_nagaoka2,vx_holevo,vy_holevo,lw_boundary\n"));
    assert!(cmd_tradeoff(0.5, &[1.0]).is_err());
}

fn record(i: usize, hat: (f64, f64)) -> RunRecord {
    RunRecord {
        run_index: i,
        theta_true: (0.0, 0.0),
        theta_hat_raw: hat,
        theta_hat_mitigated: None,
        scheme: Scheme::Two,
        shots_used: 512,
        copies_consumed: 1024,
    }
}

#[test]
fn report_hand_built_csv() {
    let csv = "run_index,theta_x_true,theta_y_true,theta_x_hat_raw,theta_y_hat_raw,scheme,shots,copies\n\
               0,0,0,0.1,0,two,512,1024\n\
               1,0,0,0,0.1,two,512,1024\n";
    let a = cmd_report(csv, None).unwrap();
    assert!(close(a.raw.mse, 0.01, 1e-15));
    assert!(close(a.raw.scaled_mse, 10.24, 1e-14));
    assert!(a.mitigated.is_none() && a.raw.lw_margin.is_none());
}

#[test]
fn report_rejects_bad_input() {
    let full = write_runs_csv(&[record(0, (0.1, 0.0)), record(1, (0.0, 0.1))]);
    let cut = &full[..full.len() - 12];
    for bad in [
        cut,
        "",
        "run_index,theta_x_true\n0,0\n",
        "run_index,theta_x_true,theta_y_true,theta_x_hat_raw,theta_y_hat_raw,scheme,shots,copies\n",
        "run_index,theta_x_true,theta_y_true,theta_x_hat_raw,theta_y_hat_raw,scheme,shots,copies\n0,0,0,x,0,two,512,1024\n",
        "run_index,theta_x_true,theta_y_true,theta_x_hat_raw,theta_y_hat_raw,scheme,shots,copies\n0,0,0,0,0,four,512,1024\n",
    ] {
        let e = cmd_report(bad, None).unwrap_err();
        assert!(matches!(e, metrology_harness::HarnessError::SchemaMismatch(_)), "{bad:?}: {e}");
    }
}

#[test]
fn runs_csv_round_trips_exactly() {
    let mut records = vec![record(0, (0.1, -1.0 / 3.0)), record(1, (std::f64::consts::PI / 100.0, 1e-300))];
    records[0].theta_hat_mitigated = Some((0.2, 0.7));
    records[1].theta_hat_mitigated = Some((-0.0, 5e-17));
    assert_eq!(read_runs_csv(&write_runs_csv(&records)).unwrap(), records);
    records[1].theta_hat_mitigated = None;
    let back = read_runs_csv(&write_runs_csv(&records)).unwrap();
    assert!(back.iter().all(|r| r.theta_hat_mitigated.is_none()));
}

#[test]
fn optimize_then_synth() {
    let povm = cmd_optimize(0.5, 2, 0.5, 0, 20).unwrap();
    let text = povm.to_json();
    let circ = cmd_synth(&text).unwrap();
    assert!(circ.cx_count() <= 3);
    let model = ProbeModel::new(0.5, 2).unwrap();
    let crb = classical_fisher(&povm, &model).unwrap().weighted_crb(&Matrix2::identity());
    assert!((crb - 6.5).abs() <= 0.005 * 6.5);

    let reread = Povm::from_json(&text).unwrap();
    let rho = model.state_at(0.05, -0.1);
    let extra = circ.width - 2;
    let sim = outcome_probs(&pad_ancillas(&rho, extra), &circ, &NoiseModel::ideal()).unwrap();
    for (a, b) in sim.probabilities.iter().zip(reread.probabilities(&rho)) {
        assert!((a - b).abs() <= 1e-8);
    }
    assert_eq!(cmd_synth("{").unwrap_err().exit_code(), 3);
}
