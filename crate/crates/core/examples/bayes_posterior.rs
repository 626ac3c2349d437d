//! Bayes risks under the least-favorable shifts approach the minimax risks as the prior widens.

use nalgebra::{DMatrix, DVector};
use shiftrisk::experiment::ExperimentConfig;
use shiftrisk::perturbations::ShiftClass;
use shiftrisk::theory::{bayes_posterior_location, location_risk, lr_bayes, lr_prediction_risk, LrLoss};
use shiftrisk::DistributionSpec;

fn main() -> shiftrisk::Result<()> {
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])) / 6.0;
    let eps = 0.2;
    for b in [1.0, 10.0, 1e3, f64::INFINITY] {
        println!("b={b:<8} JDS posterior trace {:.8}", bayes_posterior_location(eps, 10, &cov, b, ShiftClass::Jds)?);
    }
    println!("minimax JDS risk      {:.8}", location_risk(ShiftClass::Jds, eps, 10, cov.trace())?);

    let cfg = ExperimentConfig::regression(true, 7);
    let DistributionSpec::LinearModel { design, noise_cov, .. } = &cfg.dist else { unreachable!() };
    for b in [1.0, 100.0, f64::INFINITY] {
        println!("b={b:<8} regression prediction {:.8}", lr_bayes(eps, design, noise_cov, b, LrLoss::Prediction)?);
    }
    println!("exact                 {:.8}", lr_prediction_risk(eps, design, noise_cov)?);
    Ok(())
}
