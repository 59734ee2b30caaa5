//! Subcommand bodies. Each returns data plus its serialised form so the CLI
//! and the tests share one code path.

use metrology_core::bounds::{
    closed_form, holevo_sdp, lw_margin, nagaoka_hayashi_sdp_with, tradeoff_curve, BoundKind, BoundOptions,
};
use metrology_core::infer::{RunRecord, Scheme};
use metrology_core::povm::{OptimizeOptions, Povm};
use metrology_core::probe::ProbeModel;
use metrology_core::synth::Circuit;
use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NoiseSpec};
use crate::error::HarnessError;
use crate::pipeline::{povm_circuit, Experiment};
use crate::report::{analyse, fmt_f64, read_runs_csv, write_runs_csv, Analysis, BoundRefs, Report};

/// Largest ε the bound tables accept.
pub const MAX_TABLE_EPSILON: f64 = 0.95;

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub epsilon: f64,
    pub sld: f64,
    /// `N_m` for `m = 1..=max_copies`, per `m`-copy measurement.
    pub n: Vec<f64>,
    pub holevo: f64,
    /// `1 - H / (m N_m)`.
    pub gaps: Vec<f64>,
    /// Largest relative deviation of the SDP values from the closed forms.
    pub sdp_deviation: f64,
    pub status: String,
}

fn bounds_row(epsilon: f64, max_copies: usize) -> BoundsRow {
    let c = closed_form(epsilon).expect("epsilon checked by caller");
    let mut n = vec![c.n1, c.n2];
    n.truncate(max_copies);
    let mut status = String::from("ok");
    let mut dev: f64 = 0.0;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let opts = BoundOptions {
        allow_large: max_copies > 3,
        ..BoundOptions::default()
    };
    let ident = Matrix2::identity();
    let mut run = || -> Result<(), HarnessError> {
        for m in 1..=max_copies {
            let v = nagaoka_hayashi_sdp_with(&ProbeModel::new(epsilon, m)?, &ident, &opts)?.value;
            if m <= 2 {
                dev = dev.max(rel(v, n[m - 1]));
            } else {
                n.push(v);
            }
        }
        dev = dev.max(rel(holevo_sdp(&ProbeModel::new(epsilon, 1)?, &ident)?.value, c.holevo));
        Ok(())
    };
    if let Err(e) = run() {
        status = e.to_string().replace([',', '\n'], ";");
        n.resize(max_copies, f64::NAN);
        dev = f64::NAN;
    }
    let gaps = n
        .iter()
        .enumerate()
        .map(|(i, v)| 1.0 - c.holevo / ((i + 1) as f64 * v))
        .collect();
    BoundsRow {
        epsilon,
        sld: c.sld_sum,
        n,
        holevo: c.holevo,
        gaps,
        sdp_deviation: dev,
        status,
    }
}

/// Bound table over an ε grid. Closed forms for `N_1`, `N_2` and `H`, SDP
/// values above; solver failures are reported in the row's `status`.
pub fn cmd_bounds(grid: &[f64], max_copies: usize) -> Result<(Vec<BoundsRow>, String), HarnessError> {
    if max_copies == 0 || max_copies > metrology_core::probe::MAX_COPIES {
        return Err(HarnessError::Config(format!("copies must lie in 1..={}", metrology_core::probe::MAX_COPIES)));
    }
    if let Some(bad) = grid.iter().find(|e| !(0.0..=MAX_TABLE_EPSILON).contains(*e)) {
        return Err(HarnessError::Config(format!("epsilon {bad} outside [0, {MAX_TABLE_EPSILON}]")));
    }
    let rows: Vec<BoundsRow> = grid.par_iter().map(|&e| bounds_row(e, max_copies)).collect();
    let mut header = vec!["epsilon".to_string(), "sld".to_string()];
    header.extend((1..=max_copies).map(|m| format!("n{m}")));
    header.push("holevo".into());
    header.extend((1..=max_copies).map(|m| format!("gap_{m}")));
    header.push("sdp_deviation".into());
    header.push("status".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![fmt_f64(r.epsilon), fmt_f64(r.sld)];
            v.extend(r.n.iter().map(|x| fmt_f64(*x)));
            v.push(fmt_f64(r.holevo));
            v.extend(r.gaps.iter().map(|x| fmt_f64(*x)));
            v.push(fmt_f64(r.sdp_deviation));
            v.push(r.status.clone());
            v
        })
        .collect();
    Ok((rows, csv_text(&header, &body)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub weight: f64,
    pub vx_nagaoka1: f64,
    pub vy_nagaoka1: f64,
    pub lw_margin_nagaoka1: f64,
    pub vx_nagaoka2: f64,
    pub vy_nagaoka2: f64,
    pub lw_margin_nagaoka2: f64,
    pub vx_holevo: f64,
    pub vy_holevo: f64,
    /// `(1-ε)^2`, the Lu–Wang boundary.
    pub lw_boundary: f64,
}

/// Per-copy variance trade-off curves for single-copy, two-copy and
/// asymptotic measurements.
pub fn cmd_tradeoff(epsilon: f64, weights: &[f64]) -> Result<(Vec<TradeoffRow>, String), HarnessError> {
    let opts = BoundOptions::default();
    let nh1 = tradeoff_curve(epsilon, 1, BoundKind::NagaokaHayashi, weights, &opts)?;
    let nh2 = tradeoff_curve(epsilon, 2, BoundKind::NagaokaHayashi, weights, &opts)?;
    let hol = tradeoff_curve(epsilon, 1, BoundKind::Holevo, weights, &opts)?;
    let rows: Vec<TradeoffRow> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| TradeoffRow {
            weight: w,
            vx_nagaoka1: nh1[i].v_x,
            vy_nagaoka1: nh1[i].v_y,
            lw_margin_nagaoka1: lw_margin(nh1[i].v_x, nh1[i].v_y, epsilon),
            vx_nagaoka2: nh2[i].v_x,
            vy_nagaoka2: nh2[i].v_y,
            lw_margin_nagaoka2: lw_margin(nh2[i].v_x, nh2[i].v_y, epsilon),
            vx_holevo: hol[i].v_x,
            vy_holevo: hol[i].v_y,
            lw_boundary: (1.0 - epsilon).powi(2),
        })
        .collect();
    let header: Vec<String> = [
        "weight",
        "vx_nagaoka1",
        "vy_nagaoka1",
        "lw_margin_nagaoka1",
        "vx_nagaoka2",
        "vy_nagaoka2",
        "lw_margin_nagaoka2",
        "vx_holevo",
        "vy_holevo",
        "lw_boundary",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            [
                r.weight,
                r.vx_nagaoka1,
                r.vy_nagaoka1,
                r.lw_margin_nagaoka1,
                r.vx_nagaoka2,
                r.vy_nagaoka2,
                r.lw_margin_nagaoka2,
                r.vx_holevo,
                r.vy_holevo,
                r.lw_boundary,
            ]
            .iter()
            .map(|x| fmt_f64(*x))
            .collect()
        })
        .collect();
    Ok((rows, csv_text(&header, &body)))
}

pub struct SimulateOutput {
    pub report: Report,
    pub records: Vec<RunRecord>,
    pub runs_csv: String,
}

fn report_for(exp: &Experiment, records: &[RunRecord]) -> Result<Report, HarnessError> {
    let cfg = &exp.config;
    let analysis = analyse(records, Some(cfg.epsilon))?;
    let bounds = BoundRefs::new(cfg.epsilon, cfg.scheme)?;
    Ok(Report {
        config: cfg.clone(),
        noise: exp.noise.clone(),
        cx_count: exp.setup.total_cx(),
        holevo_consistent: Report::check_holevo(&analysis, &bounds, &exp.noise),
        analysis,
        bounds,
        corrections: exp.corrections.clone(),
    })
}

/// Full pipeline at `theta_true`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateOutput, HarnessError> {
    let exp = Experiment::new(cfg)?;
    simulate_with(&exp)
}

pub fn simulate_with(exp: &Experiment) -> Result<SimulateOutput, HarnessError> {
    let records = exp.run_at(exp.config.theta_true)?;
    let report = report_for(exp, &records)?;
    Ok(SimulateOutput {
        runs_csv: write_runs_csv(&records),
        report,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta_x: f64,
    pub theta_y: f64,
    pub analysis: Analysis,
}

impl SweepRow {
    /// Mean signed bias of the raw or mitigated estimates.
    pub fn bias(&self, mitigated: bool) -> Option<(f64, f64)> {
        let s = if mitigated {
            self.analysis.mitigated.as_ref()?
        } else {
            &self.analysis.raw
        };
        Some(s.bias)
    }
}

const SWEEP_COLUMNS: [&str; 16] = [
    "theta_x_true",
    "theta_y_true",
    "mean_x_raw",
    "mean_y_raw",
    "se_x_raw",
    "se_y_raw",
    "mse_raw",
    "scaled_mse_raw",
    "scaled_mse_std_raw",
    "mean_x_mit",
    "mean_y_mit",
    "se_x_mit",
    "se_y_mit",
    "mse_mit",
    "scaled_mse_mit",
    "scaled_mse_std_mit",
];

/// Mean raw and mitigated estimates across the configured θ grid. Each grid
/// point is an independent experiment with its own shots and calibrations.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, String), HarnessError> {
    let exp = Experiment::new(cfg)?;
    sweep_with(&exp)
}

pub fn sweep_with(exp: &Experiment) -> Result<(Vec<SweepRow>, String), HarnessError> {
    let cfg = &exp.config;
    let grid = cfg.theta_grid.clone().unwrap_or_default();
    let rows = grid
        .thetas(cfg.theta_true)
        .into_par_iter()
        .map(|theta| {
            let seed = crate::seeds::for_point(cfg.seed, theta, cfg.theta_true);
            let records = if seed == cfg.seed {
                exp.run_at(theta)?
            } else {
                exp.reseeded(seed)?.run_at(theta)?
            };
            Ok(SweepRow {
                theta_x: theta.0,
                theta_y: theta.1,
                analysis: analyse(&records, Some(cfg.epsilon))?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let header: Vec<String> = SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![fmt_f64(r.theta_x), fmt_f64(r.theta_y)];
            let cells = |s: Option<&crate::report::Stats>| -> Vec<String> {
                match s {
                    Some(s) => [
                        s.mean_estimate.0,
                        s.mean_estimate.1,
                        s.bias_std_error.0,
                        s.bias_std_error.1,
                        s.mse,
                        s.scaled_mse,
                        s.bootstrap_std,
                    ]
                    .iter()
                    .map(|x| fmt_f64(*x))
                    .collect(),
                    None => vec![String::new(); 7],
                }
            };
            v.extend(cells(Some(&r.analysis.raw)));
            v.extend(cells(r.analysis.mitigated.as_ref()));
            v
        })
        .collect();
    Ok((rows, csv_text(&header, &body)))
}

/// Re-analyse a runs CSV.
pub fn cmd_report(runs_csv: &str, epsilon: Option<f64>) -> Result<Analysis, HarnessError> {
    analyse(&read_runs_csv(runs_csv)?, epsilon)
}

pub fn cmd_optimize(epsilon: f64, copies: usize, weight_w: f64, seed: u64, restarts: usize) -> Result<Povm, HarnessError> {
    let model = ProbeModel::new(epsilon, copies)?;
    let opts = OptimizeOptions {
        seed,
        restarts,
        ..OptimizeOptions::default()
    };
    Ok(metrology_core::povm::optimize_collective(&model, weight_w, &opts)?)
}

pub fn cmd_synth(povm_json: &str) -> Result<Circuit, HarnessError> {
    let povm = Povm::from_json(povm_json)?;
    povm_circuit(&povm)
}

/// Scaled MSE of one scheme under one noise profile, over repeated seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub profile: String,
    pub scheme: Scheme,
    pub seeds: usize,
    pub mean_scaled_mse: f64,
    pub min_scaled_mse: f64,
    pub mean_scaled_mse_mit: Option<f64>,
    pub min_scaled_mse_mit: Option<f64>,
}

/// Simulated stand-in for a cross-device comparison: every (profile, scheme)
/// pair is run at seeds `seed, seed + 1, ...` and summarised by mean and min.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    profiles: &[String],
    schemes: &[Scheme],
    repeats: usize,
) -> Result<(Vec<CompareRow>, String), HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::Config("repeats must be positive".into()));
    }
    let mut rows = Vec::new();
    for profile in profiles {
        for &scheme in schemes {
            let mut c = cfg.clone();
            c.noise = NoiseSpec::Profile(profile.clone());
            c.scheme = scheme;
            c.shots_per_circuit = None;
            let base = Experiment::new(&c)?;
            let analyses = (0..repeats as u64)
                .map(|k| {
                    let exp = if k == 0 { base.clone() } else { base.reseeded(c.seed.wrapping_add(k))? };
                    Ok(simulate_with(&exp)?.report.analysis)
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let summarise = |v: Vec<f64>| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                (mean, v.into_iter().fold(f64::INFINITY, f64::min))
            };
            let (mean, min) = summarise(analyses.iter().map(|a| a.raw.scaled_mse).collect());
            let mit: Option<Vec<f64>> = analyses.iter().map(|a| a.mitigated.as_ref().map(|m| m.scaled_mse)).collect();
            let mit = mit.map(summarise);
            rows.push(CompareRow {
                profile: profile.clone(),
                scheme,
                seeds: repeats,
                mean_scaled_mse: mean,
                min_scaled_mse: min,
                mean_scaled_mse_mit: mit.map(|m| m.0),
                min_scaled_mse_mit: mit.map(|m| m.1),
            });
        }
    }
    let header: Vec<String> = [
        "profile",
        "scheme",
        "seeds",
        "mean_scaled_mse",
        "min_scaled_mse",
        "mean_scaled_mse_mit",
        "min_scaled_mse_mit",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.profile.clone(),
                r.scheme.name().to_string(),
                r.seeds.to_string(),
                fmt_f64(r.mean_scaled_mse),
                fmt_f64(r.min_scaled_mse),
                opt(r.mean_scaled_mse_mit),
                opt(r.min_scaled_mse_mit),
            ]
        })
        .collect::<Vec<_>>();
    Ok((rows, csv_text(&header, &body)))
}
