//! Gaussian location: empirical minimax risk per shift class against the closed forms.

use shiftrisk::experiment::ExperimentConfig;
use shiftrisk::perturbations::ShiftClass;
use shiftrisk::risk::sweep_eps;
use shiftrisk::theory::location_risk;

fn main() -> shiftrisk::Result<()> {
    let cfg = ExperimentConfig::location();
    let setup = cfg.setup()?;
    let grid = [(f64::NAN, 0.05), (f64::NAN, 0.2), (f64::NAN, 1.0)];
    let report = sweep_eps(&setup, &grid, 20_000, 42)?;

    println!("{:>6} {:>4} {:>10} {:>12} {:>10} {:>12}", "eps", "cls", "estimator", "empirical", "se", "theory");
    for r in &report.rows {
        println!(
            "{:>6.2} {:>4} {:>10} {:>12.6} {:>10.2e} {:>12.6}",
            r.eps,
            r.shift_class.as_str(),
            r.minimax_estimator,
            r.minimax_empirical,
            r.std_error,
            r.theory_exact.unwrap_or(f64::NAN)
        );
    }

    // IDS switches regime at eps = √trΣ / (n - 1)
    let t = 1.0;
    let knee = t / 9.0;
    for eps in [0.5 * knee, knee, 2.0 * knee] {
        let v: Vec<f64> = ShiftClass::ALL.iter().map(|&c| location_risk(c, eps, 10, t).unwrap()).collect();
        println!("eps={eps:.4}: CDS {:.5} IDS {:.5} JDS {:.5}", v[0], v[1], v[2]);
    }
    Ok(())
}
