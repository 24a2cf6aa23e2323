use std::path::PathBuf;
use std::process::ExitCode;

use aggdiff::harness::{self, ExperimentConfig};
use aggdiff::steiner::{run_property_suite, SuiteConfig};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

#[derive(Parser, Debug)]
#[command(name = "aggdiff", version, about = "Aggregation-diffusion simulator and stationary-state diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration to a stationary state and write its artifacts.
    Simulate {
        /// TOML experiment configuration.
        config: PathBuf,
    },
    /// Run every point of the configuration's [sweep] section.
    Sweep {
        config: PathBuf,
    },
    /// Analyse a stored field as a stationary state.
    Analyze {
        /// Field CSV written by `simulate`.
        field: PathBuf,
        #[arg(long, default_value = "bump")]
        kernel: String,
        #[arg(long)]
        m: f64,
    },
    /// Randomised checks of the symmetrization and interaction-energy machinery.
    SteinerCheck {
        #[arg(long, default_value_t = SuiteConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SuiteConfig::default().pairs)]
        pairs: usize,
        #[arg(long, default_value_t = SuiteConfig::default().tuples)]
        tuples: usize,
        #[arg(long, default_value_t = SuiteConfig::default().functions)]
        functions: usize,
        #[arg(long, default_value_t = SuiteConfig::default().unions)]
        unions: usize,
    },
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        println!("hard assertions FAILED");
        ExitCode::FAILURE
    }
}

fn simulate(path: PathBuf) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let outcome = harness::run(&cfg)?;
    println!("kernel: {}  mass: {}  steps: {}", outcome.kernel, outcome.mass, outcome.trajectory.steps);
    print!("{}", outcome.report.text_block());
    println!("artifacts: {}", cfg.output.dir.display());
    Ok(verdict(outcome.report.hard_assertions_pass()))
}

fn sweep(path: PathBuf) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let result = harness::sweep(&cfg)?;
    print!("{}", result.to_csv());
    println!("written: {}", cfg.output.dir.join("sweep.csv").display());
    Ok(verdict(result.all_pass()))
}

fn analyze(field: PathBuf, kernel: String, m: f64) -> Result<ExitCode> {
    let report = harness::analyze_file(&field, &kernel, m).with_context(|| format!("analysing {}", field.display()))?;
    print!("{}", report.text_block());
    Ok(verdict(report.hard_assertions_pass()))
}

fn steiner_check(config: SuiteConfig) -> Result<ExitCode> {
    info!("steiner suite with {config:?}");
    let report = run_property_suite(&config)?;
    for check in &report.checks {
        println!("{check}");
    }
    Ok(verdict(report.all_pass()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config } => simulate(config),
        Command::Sweep { config } => sweep(config),
        Command::Analyze { field, kernel, m } => analyze(field, kernel, m),
        Command::SteinerCheck {
            seed,
            pairs,
            tuples,
            functions,
            unions,
        } => steiner_check(SuiteConfig {
            seed,
            pairs,
            tuples,
            functions,
            unions,
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
