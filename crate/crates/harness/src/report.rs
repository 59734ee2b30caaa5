//! Run records to summary statistics, and the runs CSV they travel in.

use metrology_core::bounds::{closed_form, lw_margin, nagaoka_hayashi_sdp};
use metrology_core::infer::{bootstrap_statistic, chisq_check, mse_of, ChisqCheck, RunRecord, Scheme};
use metrology_core::probe::ProbeModel;
use metrology_core::sim::NoiseModel;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::pipeline::Correction;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Fixed so that re-analysing a CSV reproduces the original error bars.
const ANALYSIS_SEED: u64 = 0x6d73_655f_626f_6f74;

/// Summary of one estimate stream (raw or mitigated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mse: f64,
    pub scaled_mse: f64,
    /// Bootstrap standard deviation of `scaled_mse`.
    pub bootstrap_std: f64,
    pub mean_estimate: (f64, f64),
    pub bias: (f64, f64),
    /// Standard error of each mean estimate.
    pub bias_std_error: (f64, f64),
    /// Per-copy mean squared error of each parameter.
    pub v_x: f64,
    pub v_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lw_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lw_margin_std: Option<f64>,
    /// Per-run squared error against a scaled χ²(2); needs 100 runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chisq: Option<ChisqCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub runs: usize,
    pub scheme: Scheme,
    pub theta_true: (f64, f64),
    pub copies_consumed: u64,
    pub raw: Stats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigated: Option<Stats>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn stats(records: &[RunRecord], mitigated: bool, epsilon: Option<f64>) -> Result<Stats, HarnessError> {
    let summary = mse_of(records, mitigated)?;
    let n = records.len();
    let copies = records[0].copies_consumed as f64;
    let truth = records[0].theta_true;
    let hat = |r: &RunRecord| {
        if mitigated {
            r.theta_hat_mitigated.unwrap_or(r.theta_hat_raw)
        } else {
            r.theta_hat_raw
        }
    };
    let xs: Vec<f64> = records.iter().map(|r| hat(r).0).collect();
    let ys: Vec<f64> = records.iter().map(|r| hat(r).1).collect();
    let ex: Vec<f64> = xs.iter().map(|x| copies * (x - truth.0).powi(2)).collect();
    let ey: Vec<f64> = ys.iter().map(|y| copies * (y - truth.1).powi(2)).collect();
    let scaled: Vec<f64> = ex.iter().zip(&ey).map(|(a, b)| a + b).collect();
    let mean_of = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;

    let bootstrap_std = bootstrap_statistic(n, BOOTSTRAP_RESAMPLES, ANALYSIS_SEED, |idx| mean_of(&scaled, idx))?;
    let (mx, sx) = mean_sd(&xs);
    let (my, sy) = mean_sd(&ys);
    let v_x = ex.iter().sum::<f64>() / n as f64;
    let v_y = ey.iter().sum::<f64>() / n as f64;
    let (lw, lw_std) = match epsilon {
        Some(eps) => {
            let sd = bootstrap_statistic(n, BOOTSTRAP_RESAMPLES, ANALYSIS_SEED ^ 1, |idx| {
                lw_margin(mean_of(&ex, idx), mean_of(&ey, idx), eps)
            })?;
            (Some(lw_margin(v_x, v_y, eps)), Some(sd))
        }
        None => (None, None),
    };
    let per_run: Vec<f64> = records.iter().map(|r| r.squared_error(mitigated)).collect();
    let chisq = if n >= 100 { Some(chisq_check(&per_run, 2.0)?) } else { None };
    Ok(Stats {
        mse: summary.mse,
        scaled_mse: summary.scaled_mse,
        bootstrap_std,
        mean_estimate: (mx, my),
        bias: (mx - truth.0, my - truth.1),
        bias_std_error: (sx / (n as f64).sqrt(), sy / (n as f64).sqrt()),
        v_x,
        v_y,
        lw_margin: lw,
        lw_margin_std: lw_std,
        chisq,
    })
}

/// Recompute every statistic from the records alone. `epsilon` enables the
/// Lu–Wang margin.
pub fn analyse(records: &[RunRecord], epsilon: Option<f64>) -> Result<Analysis, HarnessError> {
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| r.run_index);
    let first = sorted.first().ok_or(metrology_core::infer::InferError::EmptyInput)?;
    let raw = stats(&sorted, false, epsilon)?;
    let mitigated = if sorted.iter().all(|r| r.theta_hat_mitigated.is_some()) {
        Some(stats(&sorted, true, epsilon)?)
    } else {
        None
    };
    Ok(Analysis {
        runs: sorted.len(),
        scheme: first.scheme,
        theta_true: first.theta_true,
        copies_consumed: first.copies_consumed,
        raw,
        mitigated,
    })
}

/// Reference lines in scaled-MSE units (variance sum times copies).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRefs {
    pub n1: f64,
    pub two_n2: f64,
    pub holevo: f64,
    /// `m N_m` for the scheme's copy number.
    pub scheme_bound: f64,
}

impl BoundRefs {
    pub fn new(epsilon: f64, scheme: Scheme) -> Result<Self, HarnessError> {
        let c = closed_form(epsilon)?;
        let scheme_bound = match scheme {
            Scheme::Single => c.n1,
            Scheme::Two => 2.0 * c.n2,
            Scheme::Three => {
                let model = ProbeModel::new(epsilon, 3)?;
                3.0 * nagaoka_hayashi_sdp(&model, &Matrix2::identity())?.value
            }
        };
        Ok(Self {
            n1: c.n1,
            two_n2: 2.0 * c.n2,
            holevo: c.holevo,
            scheme_bound,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub noise: NoiseModel,
    pub cx_count: usize,
    pub analysis: Analysis,
    pub bounds: BoundRefs,
    /// False when a noiseless run reports scaled MSE more than 3σ below the
    /// Holevo line, which would mean a bug rather than a result.
    pub holevo_consistent: bool,
    pub corrections: Vec<Correction>,
}

impl Report {
    pub fn check_holevo(analysis: &Analysis, bounds: &BoundRefs, noise: &NoiseModel) -> bool {
        if !noise.is_noiseless() {
            return true;
        }
        std::iter::once(&analysis.raw)
            .chain(analysis.mitigated.as_ref())
            .all(|s| s.scaled_mse >= bounds.holevo - 3.0 * s.bootstrap_std)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

const RUN_COLUMNS: [&str; 10] = [
    "run_index",
    "theta_x_true",
    "theta_y_true",
    "theta_x_hat_raw",
    "theta_y_hat_raw",
    "theta_x_hat_mit",
    "theta_y_hat_mit",
    "scheme",
    "shots",
    "copies",
];

fn header(mitigated: bool) -> Vec<&'static str> {
    RUN_COLUMNS
        .iter()
        .copied()
        .filter(|c| mitigated || !c.ends_with("_mit"))
        .collect()
}

pub fn write_runs_csv(records: &[RunRecord]) -> String {
    let mitigated = records.iter().all(|r| r.theta_hat_mitigated.is_some()) && !records.is_empty();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(mitigated)).expect("in-memory write");
    for r in records {
        let mut row = vec![
            r.run_index.to_string(),
            fmt_f64(r.theta_true.0),
            fmt_f64(r.theta_true.1),
            fmt_f64(r.theta_hat_raw.0),
            fmt_f64(r.theta_hat_raw.1),
        ];
        if let (true, Some(m)) = (mitigated, r.theta_hat_mitigated) {
            row.push(fmt_f64(m.0));
            row.push(fmt_f64(m.1));
        }
        row.push(r.scheme.name().to_string());
        row.push(r.shots_used.to_string());
        row.push(r.copies_consumed.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

fn schema(msg: impl Into<String>) -> HarnessError {
    HarnessError::SchemaMismatch(msg.into())
}

pub fn read_runs_csv(text: &str) -> Result<Vec<RunRecord>, HarnessError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let head: Vec<String> = rd
        .headers()
        .map_err(|e| schema(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mitigated = if head == header(true) {
        true
    } else if head == header(false) {
        false
    } else {
        return Err(schema(format!("unexpected header {head:?}")));
    };
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| schema(e.to_string()))?;
        let bad = |what: &str| schema(format!("row {}: bad {what}", line + 1));
        let num = |i: usize| -> Result<f64, HarnessError> { row[i].trim().parse().map_err(|_| bad(&head[i])) };
        let int = |i: usize| -> Result<u64, HarnessError> { row[i].trim().parse().map_err(|_| bad(&head[i])) };
        let k = if mitigated { 7 } else { 5 };
        out.push(RunRecord {
            run_index: int(0)? as usize,
            theta_true: (num(1)?, num(2)?),
            theta_hat_raw: (num(3)?, num(4)?),
            theta_hat_mitigated: if mitigated { Some((num(5)?, num(6)?)) } else { None },
            scheme: Scheme::parse(row[k].trim()).ok_or_else(|| bad("scheme"))?,
            shots_used: int(k + 1)?,
            copies_consumed: int(k + 2)?,
        });
    }
    if out.is_empty() {
        return Err(schema("no rows"));
    }
    Ok(out)
}
