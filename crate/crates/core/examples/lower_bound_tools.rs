//! Two-point, Fano and Assouad bounds next to the exact independent-shift risk.

use shiftrisk::perturbations::ShiftClass;
use shiftrisk::theory::{location_risk, lower_bound, LowerBoundTool, Phi};

fn main() -> shiftrisk::Result<()> {
    let (sigma, n, p) = (1.0, 20, 8);
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "eps", "le cam", "fano", "assouad", "exact");
    for eps in [0.0, 0.1, 0.5, 1.0] {
        let lecam = lower_bound(&LowerBoundTool::LeCamGauss1d { eps, sigma, n }, Phi::Square)?.value;
        let fano = lower_bound(&LowerBoundTool::FanoGauss { eps, sigma, n, p }, Phi::Square)?.value;
        let assouad = lower_bound(&LowerBoundTool::AssouadGauss { eps, sigma, n, p }, Phi::Square)?.value;
        let exact = location_risk(ShiftClass::Ids, eps, n, p as f64 * sigma * sigma)?;
        println!("{eps:>5} {lecam:>10.4e} {fano:>10.4e} {assouad:>10.4e} {exact:>10.4e}");
    }
    let rate = lower_bound(&LowerBoundTool::NonparamReg { eps: 0.01, sigma, n: 1000, s: 2.0 }, Phi::Square)?;
    println!("nonparametric regression rate {:.3e} (rate only: {})", rate.value, rate.rate_only);
    Ok(())
}
