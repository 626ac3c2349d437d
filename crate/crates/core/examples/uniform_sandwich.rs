//! Uniform location with n = 50: switching threshold, bounds, and the empirical minimax
//! over the order-statistic catalog.

use shiftrisk::experiment::ExperimentConfig;
use shiftrisk::perturbations::ShiftClass;
use shiftrisk::risk::sweep_eps;
use shiftrisk::theory::{uniform_ids_lower, uniform_jds_upper, uniform_switch_threshold};

fn main() -> shiftrisk::Result<()> {
    let n = 50;
    println!("switching threshold C_U({n}) = {:.7}", uniform_switch_threshold(n)?);

    let mut setup = ExperimentConfig::uniform().setup()?;
    setup.shift_classes = vec![ShiftClass::Jds];
    let grid: Vec<(f64, f64)> = [-2.0, -1.0, 0.0].iter().map(|&a| (a, (n as f64).powf(a))).collect();
    let report = sweep_eps(&setup, &grid, 2000, 7)?;
    println!("{:>6} {:>12} {:>12} {:>12}  best", "alpha", "lower", "empirical", "upper");
    for r in &report.rows {
        println!(
            "{:>6} {:>12.4e} {:>12.4e} {:>12.4e}  {}",
            r.alpha,
            uniform_ids_lower(r.eps, n)?,
            r.minimax_empirical,
            uniform_jds_upper(r.eps, n)?,
            r.minimax_estimator
        );
    }
    Ok(())
}
