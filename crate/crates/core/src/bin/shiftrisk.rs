use clap::{Parser, Subcommand, ValueEnum};
use shiftrisk::experiment::{self, ExperimentConfig, OutputFormat, Table};
use shiftrisk::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shiftrisk", version, about = "Minimax risk under Wasserstein distribution shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimator x perturbation risk table at a single budget.
    RiskMatrix(Flags),
    /// Empirical minimax risk against theory over a budget grid.
    Sweep(Flags),
    /// Compare simulations with theory; exits 1 on any failed check.
    Verify(Flags),
    /// Theory values only, no sampling.
    Bounds(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(f) = self.format {
            cfg.output_format = match f {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
        }
        if let Some(o) = &self.out {
            cfg.output_path = Some(o.clone());
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads: must be positive".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(table: &Table, cfg: &ExperimentConfig) -> Result<(), Error> {
    if let Some(text) = table.write(cfg.output_format, cfg.output_path.as_deref())? {
        print!("{text}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::RiskMatrix(f) => {
            let cfg = f.load()?;
            emit(&experiment::cmd_risk_matrix(&cfg, f.threads)?, &cfg)?;
        }
        Command::Sweep(f) => {
            let cfg = f.load()?;
            emit(&experiment::cmd_sweep(&cfg, f.threads)?, &cfg)?;
        }
        Command::Bounds(f) => {
            let cfg = f.load()?;
            emit(&experiment::cmd_bounds(&cfg)?, &cfg)?;
        }
        Command::Verify(f) => {
            let cfg = f.load()?;
            let report = experiment::cmd_verify(&cfg, f.threads)?;
            emit(&report.table(), &cfg)?;
            for c in report.failures() {
                eprintln!(
                    "FAILED {}: value {} outside [{:?}, {:?}] +- {}",
                    c.name, c.value, c.lower, c.upper, c.tolerance
                );
            }
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
