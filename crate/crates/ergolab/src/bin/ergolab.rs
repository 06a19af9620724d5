use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Deserialize;

use ergolab::calibrate::{calibrate_all, SUITES};
use ergolab::experiments::{run, Experiment, ExperimentConfig};
use ergolab::Error;

/// Run an ergolab experiment, or `calibrate` to freeze constants.
#[derive(Debug, Parser)]
#[command(name = "ergolab", version)]
struct Cli {
    /// Experiment name (osc, transference, spectrum, sampling, fejer, poisson,
    /// entropy_chain, jumps, variation, bessel, forest, branches, single_scale,
    /// key_inequality, freq_snap) or `calibrate`.
    experiment: String,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationConfig {
    #[serde(default)]
    suites: Option<Vec<Experiment>>,
    seeds: Vec<u64>,
}

enum Outcome {
    Pass,
    Violation,
}

fn read_json(path: &PathBuf) -> Result<serde_json::Value, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_calibration(cli: &Cli) -> Result<Outcome, Error> {
    let cfg: CalibrationConfig = serde_json::from_value(read_json(&cli.config)?)
        .map_err(|e| Error::Config(format!("calibration config: {e}")))?;
    let suites = cfg.suites.unwrap_or_else(|| SUITES.to_vec());
    let frozen = calibrate_all(&suites, &cfg.seeds)?;
    emit(&frozen.to_json()?, cli.out.as_ref())?;
    Ok(Outcome::Pass)
}

fn run_experiment(cli: &Cli) -> Result<Outcome, Error> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut value = read_json(&cli.config)?;
    let obj = value.as_object_mut().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    match obj.get("experiment").and_then(|v| v.as_str()) {
        Some(name) if name != experiment.name() => {
            return Err(Error::Config(format!("config is for `{name}`, not `{experiment}`")));
        }
        Some(_) => {}
        None => {
            obj.insert("experiment".into(), experiment.name().into());
        }
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(format!("config {}: {e}", cli.config.display())))?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    let report = run(&cfg)?;
    emit(&report.to_json()?, cfg.out.as_ref())?;
    eprintln!("{}: {} checks, {} violations", experiment, report.checks, report.violations);
    Ok(if report.pass { Outcome::Pass } else { Outcome::Violation })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let start = Instant::now();
    let result = if cli.experiment == "calibrate" { run_calibration(&cli) } else { run_experiment(&cli) };
    eprintln!("elapsed {:.2} s", start.elapsed().as_secs_f64());
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
