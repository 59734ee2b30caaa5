use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metrology_core::infer::Scheme;
use metrology_harness::commands::{
    cmd_bounds, cmd_compare, cmd_optimize, cmd_report, cmd_simulate, cmd_sweep, cmd_synth, cmd_tradeoff,
};
use metrology_harness::config::NoiseSpec;
use metrology_harness::{ExperimentConfig, HarnessError};

/// Collective-measurement metrology: bounds, measurement design, circuit
/// synthesis and noisy Monte-Carlo experiments.
///
/// Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 solver or
/// optimiser failure, 4 a result check failed.
#[derive(Parser)]
#[command(name = "metrology", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (directory for `simulate`); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long)]
    weight: Option<f64>,
    /// Noise profile: ideal, low or high.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    no_mitigation: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bound table over an ε grid.
    Bounds {
        /// Comma-separated ε values; default 0, 0.1, ..., 0.9.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Optimise a collective measurement and write it as JSON.
    Optimize {
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compile a measurement JSON into a circuit JSON.
    Synth {
        povm: PathBuf,
        /// Write the plain-text gate list instead of JSON.
        #[arg(long)]
        text: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured experiment; writes `runs.csv` and `report.json`.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the experiment across the configured θ grid.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Per-copy variance trade-off over weights.
    Tradeoff {
        /// Comma-separated weights in (0, 1); default 0.1, ..., 0.9.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Scaled MSE per noise profile and scheme, mean and min over seeds.
    /// A simulated analogue of comparing devices.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "ideal,low,high")]
        profiles: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "single,two,three")]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute summary statistics from a runs CSV.
    Report {
        runs: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn experiment_config(c: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(e) = c.eps {
        cfg.epsilon = e;
    }
    if let Some(m) = c.copies {
        cfg.scheme = match m {
            1 => Scheme::Single,
            2 => Scheme::Two,
            3 => Scheme::Three,
            _ => return Err(HarnessError::Config(format!("experiments support 1 to 3 copies, got {m}"))),
        };
    }
    if let Some(w) = c.weight {
        cfg.weight_w = w;
    }
    if let Some(p) = &c.profile {
        cfg.noise = NoiseSpec::Profile(p.clone());
    }
    if c.no_mitigation {
        cfg.mitigation.enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Bounds { grid, common } => {
            let grid = match (grid, common.eps) {
                (Some(g), _) => g,
                (None, Some(e)) => vec![e],
                (None, None) => default_grid(),
            };
            let (_, csv) = cmd_bounds(&grid, common.copies.unwrap_or(3))?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Optimize { restarts, common } => {
            let cfg = experiment_config(&common)?;
            let povm = cmd_optimize(
                cfg.epsilon,
                common.copies.unwrap_or(2),
                cfg.weight_w,
                common.seed.unwrap_or(cfg.optimizer.seed),
                restarts,
            )?;
            emit(common.out.as_deref(), &povm.to_json())
        }
        Command::Synth { povm, text, common } => {
            let circ = cmd_synth(&read(&povm)?)?;
            let body = if text { circ.to_text() } else { circ.to_json() };
            emit(common.out.as_deref(), &body)
        }
        Command::Simulate { common } => {
            let cfg = experiment_config(&common)?;
            let out = cmd_simulate(&cfg)?;
            let json = out.report.to_json();
            match &common.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
                    emit(Some(&dir.join("runs.csv")), &out.runs_csv)?;
                    emit(Some(&dir.join("report.json")), &json)?;
                }
                None => println!("{json}"),
            }
            if !out.report.holevo_consistent {
                return Err(HarnessError::Threshold(
                    "noiseless scaled MSE lies more than 3σ below the Holevo bound".into(),
                ));
            }
            Ok(())
        }
        Command::Sweep { common } => {
            let cfg = experiment_config(&common)?;
            let (_, csv) = cmd_sweep(&cfg)?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Tradeoff { weights, common } => {
            let weights = weights.unwrap_or_else(|| (1..10).map(|i| i as f64 / 10.0).collect());
            let (_, csv) = cmd_tradeoff(common.eps.unwrap_or(0.5), &weights)?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Compare {
            profiles,
            schemes,
            repeats,
            common,
        } => {
            let cfg = experiment_config(&common)?;
            let schemes = schemes
                .iter()
                .map(|s| Scheme::parse(s).ok_or_else(|| HarnessError::Config(format!("unknown scheme {s}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let (_, csv) = cmd_compare(&cfg, &profiles, &schemes, repeats)?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Report { runs, common } => {
            let analysis = cmd_report(&read(&runs)?, common.eps)?;
            let json = serde_json::to_string_pretty(&analysis).expect("analysis serialises");
            emit(common.out.as_deref(), &json)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
