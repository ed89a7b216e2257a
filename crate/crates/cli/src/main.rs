use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use critwave_cli::acceptance::{verify, Settings};
use critwave_cli::config::{ConfigError, ExperimentConfig};
use critwave_cli::hyperbolic::run_hyperbolic;
use critwave_cli::run::{condition_reports, run_evolve};
use critwave_cli::sweep::sweep;
use critwave_core::coefficients::CoefficientSpec;
use critwave_core::ground_state::GroundStateConstants;

#[derive(Parser)]
#[command(name = "critwave", version, about = "Radial energy-critical wave experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Constant,
    SinhPower,
    Gaussian,
}

#[derive(Subcommand)]
enum Command {
    /// Print the ground-state constants for dimension d as JSON.
    Constants {
        #[arg(long, default_value_t = 3)]
        d: usize,
    },
    /// Check the structural conditions for a coefficient family.
    CheckPhi {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 3)]
        d: usize,
    },
    /// Predict, evolve and compare one configured datum.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured family over a list of amplitudes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, strictly monotone amplitudes.
        #[arg(long = "a", value_delimiter = ',', num_args = 0..)]
        a: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run hyperbolic-space data through the transform.
    Hyperbolic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "a", value_delimiter = ',')]
        a: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite; exits 0 only if every selected criterion passes.
    Verify {
        /// Criterion names or numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        dt_scale: f64,
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        cfl: f64,
        /// Print results as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn coefficient(family: Family, sigma: Option<f64>, alpha: Option<f64>, c: Option<f64>) -> anyhow::Result<CoefficientSpec> {
    let spec = match family {
        Family::Constant => CoefficientSpec::constant(c.context("--c is required for constant")?),
        Family::SinhPower => CoefficientSpec::sinh_power(sigma.context("--sigma is required for sinh_power")?),
        Family::Gaussian => CoefficientSpec::gaussian(alpha.context("--alpha is required for gaussian")?),
    };
    spec.validate()?;
    Ok(spec)
}

fn print(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Constants { d } => print(GroundStateConstants::for_dim(d)?)?,
        Command::CheckPhi {
            family,
            sigma,
            alpha,
            c,
            d,
        } => print(&condition_reports(&coefficient(family, sigma, alpha, c)?, d)?)?,
        Command::Evolve { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dir = cfg.output_dir(out.as_deref());
            let s = run_evolve(&cfg, &dir)?;
            print(&json!({
                "out": dir,
                "prediction": s.prediction.map(|p| p.verdict),
                "outcome": s.outcome.kind,
                "verdict": s.verdict,
            }))?;
        }
        Command::Sweep { config, a, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dir = cfg.output_dir(out.as_deref());
            let report = sweep(&cfg, &a, &dir)?;
            for r in report.results.iter().filter_map(|r| r.error.as_ref().map(|e| (r.row.a, e))) {
                eprintln!("row a = {} failed: {}", r.0, r.1);
            }
            print(&json!({ "phase": report.path, "rows": report.rows(), "failed": report.failed() }))?;
        }
        Command::Hyperbolic { config, a, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dir = cfg.output_dir(out.as_deref());
            let s = run_hyperbolic(&cfg, &dir, a.as_deref())?;
            print(&json!({
                "out": dir,
                "prediction": s.prediction.verdict,
                "predictions_agree": s.predictions_agree,
                "outcome": s.outcome.kind,
                "verdict": s.verdict,
            }))?;
        }
        Command::Verify {
            only,
            dt_scale,
            n,
            cfl,
            json,
        } => {
            let settings = Settings { n, cfl, dt_scale };
            let results = verify(&only, &settings)?;
            if json {
                print(&results)?;
            } else {
                for r in &results {
                    println!("{}", r.line());
                }
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if !json {
                println!("{} of {} criteria passed", results.len() - failed, results.len());
            }
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let (kind, field) = match e.downcast_ref::<ConfigError>() {
                Some(c) => ("invalid_config", Some(c.field.clone())),
                None => ("error", None),
            };
            eprintln!("{}", json!({ "error": kind, "field": field, "message": format!("{e:#}") }));
            ExitCode::from(2)
        }
    }
}
