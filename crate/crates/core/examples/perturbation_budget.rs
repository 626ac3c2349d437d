//! Every catalog perturbation moves each observation by at most eps in mean square.

use shiftrisk::experiment::ExperimentConfig;
use shiftrisk::perturbations::{budget_check, catalog};

fn main() -> shiftrisk::Result<()> {
    let eps = 0.3;
    for cfg in [ExperimentConfig::location(), ExperimentConfig::regression(false, 7), ExperimentConfig::uniform()] {
        let n = cfg.sample_size()?;
        println!("{}", cfg.problem);
        for entry in catalog(cfg.problem, eps, &cfg.dist, n)?.iter().take(6) {
            let cost = budget_check(&cfg.dist, &entry.spec, n, eps, 2000, 5)?;
            println!(
                "  {:<22} {} cost {:.5} ± {:.1e} (budget {:.5}) ok={}",
                entry.label,
                entry.class(),
                cost.mean,
                cost.std_error,
                eps * eps,
                cost.within_budget
            );
        }
    }
    Ok(())
}
