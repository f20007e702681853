use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use multiwell::output::{write_json, write_sweep};
use multiwell::run::{direct_solve, predict, solve_limiting_spectra, validate_hypotheses};
use multiwell::{fit_decay_rate, run_scenario, sweep_separation, Column, HarnessError, Scenario, SweepRecord};

#[derive(Debug, Parser)]
#[command(name = "multiwell", version, about = "Eigenvalues of distant perturbations: direct solves against asymptotics")]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory; records go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent sweep rows.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Symmetry and form-bound report for every well.
    Validate,
    /// Single-well spectra and their clusters.
    Limiting,
    /// Coupling matrices and leading predictions.
    Predict,
    /// Direct solve of the multi-well operator.
    Direct {
        /// Eigenpairs requested.
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Full scenario: predictions, direct solve and matching.
    Run,
    /// Scenario repeated over scaled geometries.
    Sweep {
        /// Comma-separated scale factors; the scenario's own list otherwise.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
    },
    /// Fit `log err = c + α log l - β l` to one sweep column.
    FitRate {
        /// Existing sweep record; the sweep is run when absent.
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// deviation, second_order_deviation, coupling_norm or recon_l2_err.
        #[arg(long, default_value = "deviation")]
        column: Column,
        #[arg(long, default_value_t = 0)]
        cluster: usize,
    },
}

fn emit<T: Serialize>(out: Option<&Path>, name: &str, value: &T) -> Result<(), HarnessError> {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            write_json(&path, value)?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Output(e.to_string()))?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::Io("stdout".into(), e)),
                _ => Ok(()),
            }
        }
    }
}

fn load(cli: &Cli) -> Result<Scenario, HarnessError> {
    let path = cli
        .scenario
        .as_deref()
        .ok_or_else(|| HarnessError::Scenario("--scenario is required".into()))?;
    let mut s = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn sweep(cli: &Cli, s: &Scenario, scales: Option<&[f64]>) -> Result<SweepRecord, HarnessError> {
    let scales = scales.unwrap_or(&s.sweep.scales);
    sweep_separation(s, scales, cli.workers)
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate => {
            let s = load(cli)?;
            let report = validate_hypotheses(&s)?;
            emit(out, "validate.json", &report)?;
            let failed: Vec<usize> = report.iter().filter(|h| !h.passes && !h.bypassed).map(|h| h.well).collect();
            if !failed.is_empty() {
                return Err(HarnessError::Hypothesis(failed));
            }
        }
        Command::Limiting => {
            let s = load(cli)?;
            let lim = solve_limiting_spectra(&s)?;
            let clusters: Vec<_> = lim
                .spectrum
                .clusters
                .iter()
                .map(|c| json!({"lambda_star": c.lambda_star, "multiplicities": c.multiplicities, "spread": c.spread}))
                .collect();
            emit(
                out,
                "limiting.json",
                &json!({"levels": lim.records(), "clusters": clusters, "warnings": lim.warnings}),
            )?;
        }
        Command::Predict => {
            let s = load(cli)?;
            let lim = solve_limiting_spectra(&s)?;
            let records: Vec<_> = predict(&s, &lim)?.into_iter().map(|p| p.record).collect();
            emit(out, "predict.json", &records)?;
        }
        Command::Direct { count } => {
            let s = load(cli)?;
            emit(out, "direct.json", &direct_solve(&s, *count, None)?.record())?;
        }
        Command::Run => {
            let s = load(cli)?;
            let rec = run_scenario(&s)?;
            emit(out, "run.json", &rec)?;
            if !rec.hypotheses_failed.is_empty() {
                return Err(HarnessError::Hypothesis(rec.hypotheses_failed));
            }
        }
        Command::Sweep { scales } => {
            let s = load(cli)?;
            let rec = sweep(cli, &s, scales.as_deref())?;
            match out {
                Some(dir) => {
                    for p in write_sweep(dir, &rec)? {
                        log::info!("wrote {}", p.display());
                    }
                }
                None => emit(None, "", &rec)?,
            }
        }
        Command::FitRate { sweep: path, column, cluster } => {
            let rec: SweepRecord = match path {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io(p.display().to_string(), e))?;
                    serde_json::from_str(&text).map_err(|e| HarnessError::Output(e.to_string()))?
                }
                None => {
                    let s = load(cli)?;
                    sweep(cli, &s, None)?
                }
            };
            emit(out, "fit.json", &fit_decay_rate(&rec, *cluster, *column)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
