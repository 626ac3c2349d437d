//! Loads an experiment config and prints its theory table and a short sweep.
//!
//! cargo run --release --example run_config -- configs/regression.toml

use shiftrisk::experiment::{cmd_bounds, cmd_sweep, ExperimentConfig};
use std::path::PathBuf;

fn main() -> shiftrisk::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "configs/location.toml".into());
    let mut cfg = ExperimentConfig::from_path(&path)?;
    print!("{}", cmd_bounds(&cfg)?.to_csv()?);
    cfg.trials = 1000;
    print!("{}", cmd_sweep(&cfg, None)?.to_csv()?);
    Ok(())
}
