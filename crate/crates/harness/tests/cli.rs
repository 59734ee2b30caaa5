use std::process::{Command, Output};

fn metrology(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metrology")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn bounds_to_stdout() {
    let out = metrology(&["bounds", "--grid", "0.5", "--copies", "2"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("5.0000000000000000e-1,"));
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "runs = 20\nnoise = \"low\"\n").unwrap();
    let run_dir = dir.path().join("run");
    let out = metrology(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["analysis"]["runs"], 20);

    let runs = run_dir.join("runs.csv");
    let out = metrology(&["report", runs.to_str().unwrap(), "--eps", "0.5"]);
    assert_eq!(code(&out), 0);
    let again: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(again["raw"]["scaled_mse"], report["analysis"]["raw"]["scaled_mse"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "epsilon = 0.5\nshot = 3\n").unwrap();
    assert_eq!(code(&metrology(&["simulate", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&metrology(&["simulate", "--profile", "medium"])), 2);
    assert_eq!(code(&metrology(&["bounds", "--grid", "0.99"])), 2);

    let csv = dir.path().join("runs.csv");
    std::fs::write(&csv, "run_index,theta_x_true\n0,0\n").unwrap();
    assert_eq!(code(&metrology(&["report", csv.to_str().unwrap()])), 2);

    assert_eq!(code(&metrology(&["compare", "--schemes", "four", "--repeats", "1"])), 2);

    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&metrology(&["report", missing.to_str().unwrap()])), 1);
}
