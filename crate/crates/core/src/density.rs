//! Pointwise density estimation under transport shift: the Gaussian-plus-bump pair that
//! realizes the lower-bound construction, its transport certificate, the bandwidth rule
//! and kernel-density risk curves.

use crate::distributions::{gaussian_holder_seminorm, BumpKernel, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, Kernel, NamedEstimator};
use crate::perturbations::PerturbationSpec;
use crate::risk::{run_cell, LossSpec, RiskCell};
use crate::rng::mix;
use crate::special::norm_pdf;
use crate::transport::{kl_numeric, talagrand_w2_upper};
use serde::{Deserialize, Serialize};

const KL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityShiftPair {
    /// `N(0, sigma²)`, represented as a bump density with `sign = 0`.
    pub clean: DistributionSpec,
    /// The clean density plus one bump pair.
    pub shifted: DistributionSpec,
    /// Requested budget.
    pub eps: f64,
    /// Talagrand bound `√(2 sigma² KL)` on the actual transport distance.
    pub eps_certified: f64,
    pub kl: f64,
    /// `|f_shifted(x0) - f_clean(x0)| = L hˢ T(0)`.
    pub pointwise_gap: f64,
    pub h: f64,
    /// Bandwidth reached at `eps = 1`; fixes the constant below.
    pub h_max: f64,
    /// `∫T² / inf φ_σ` over the bump support at `h_max`; bounds `KL ≤ c_tilde (L hˢ)² h`.
    pub c_tilde: f64,
    pub x0: f64,
}

impl DensityShiftPair {
    /// Pointwise squared loss against the clean density at `x0`.
    pub fn loss(&self) -> LossSpec {
        LossSpec::PointwiseSquared { x0: self.x0, true_value: norm_pdf_scaled(self.x0, sigma_of(&self.clean)) }
    }
}

fn norm_pdf_scaled(x: f64, sigma: f64) -> f64 {
    norm_pdf(x / sigma) / sigma
}

fn sigma_of(d: &DistributionSpec) -> f64 {
    match d {
        DistributionSpec::HolderBumpDensity { sigma_base, .. } => *sigma_base,
        _ => f64::NAN,
    }
}

/// Smallest `L` for which `N(0, sigma²)` lies in the Hölder class of radius `L/2`.
pub fn default_holder_constant(s: f64, sigma: f64) -> f64 {
    2.0 * gaussian_holder_seminorm(s, sigma) * (1.0 + 1e-9)
}

fn c_tilde_at(h: f64, kernel: &BumpKernel, sigma: f64, x0: f64) -> Result<f64> {
    let inf = norm_pdf_scaled(x0 - 0.5 * h, sigma).min(norm_pdf_scaled(x0 + 1.5 * h, sigma));
    let inf = if x0 - 0.5 * h < 0.0 && x0 + 1.5 * h > 0.0 { inf } else { inf.min(norm_pdf_scaled(x0, sigma)) };
    Ok(kernel.t_squared_integral()? / inf)
}

fn bandwidth_for(eps: f64, c_tilde: f64, sigma: f64, big_l: f64, s: f64) -> f64 {
    (eps / (2.0 * c_tilde.sqrt() * sigma * big_l)).powf(2.0 / (2.0 * s + 1.0))
}

/// Fixed point `h = bandwidth(1, c_tilde(h))`. `c_tilde` grows with `h` and the bandwidth
/// shrinks with `c_tilde`, so the root is unique.
fn h_max(kernel: &BumpKernel, s: f64, big_l: f64, sigma: f64, x0: f64) -> Result<f64> {
    let g = |h: f64| -> Result<f64> { Ok(h - bandwidth_for(1.0, c_tilde_at(h, kernel, sigma, x0)?, sigma, big_l, s)) };
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while g(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::param("bump bandwidth fixed point not found"));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Evaluation point that centres the widest bump support on the mode of `N(0, sigma²)`:
/// `x0 = -h_max/2`, so the support at `eps = 1` is `[-h_max, h_max]`.
pub fn centered_x0(s: f64, big_l: f64, sigma: f64) -> Result<f64> {
    let kernel = BumpKernel::certified(s);
    let t2 = kernel.t_squared_integral()?;
    let g = |h: f64| h - bandwidth_for(1.0, t2 / norm_pdf_scaled(h, sigma), sigma, big_l, s);
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::param("bump bandwidth fixed point not found"));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(-0.5 * hi)
}

/// The unshifted pair (both members equal to `N(0, sigma²)`), used at `eps = 0`.
pub fn unshifted_pair(s: f64, big_l: f64, sigma: f64, x0: f64) -> Result<DensityShiftPair> {
    let kernel = BumpKernel::certified(s);
    let hm = h_max(&kernel, s, big_l, sigma, x0)?;
    let clean = DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base: sigma, h: hm, sign: 0 };
    Ok(DensityShiftPair {
        shifted: clean.clone(),
        clean,
        eps: 0.0,
        eps_certified: 0.0,
        kl: 0.0,
        pointwise_gap: 0.0,
        h: 0.0,
        h_max: hm,
        c_tilde: c_tilde_at(hm, &kernel, sigma, x0)?,
        x0,
    })
}

/// Builds the bump pair for budget `eps ∈ (0, 1]` and certifies `W₂ ≤ eps` through
/// KL and Talagrand's inequality.
pub fn build_pair(eps: f64, s: f64, big_l: f64, sigma: f64, x0: f64) -> Result<DensityShiftPair> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(s > 0.0 && big_l > 0.0 && sigma > 0.0 && x0.is_finite()) {
        return Err(Error::param("s, L and sigma must be positive"));
    }
    let base_norm = gaussian_holder_seminorm(s, sigma);
    if base_norm > big_l / 2.0 {
        return Err(Error::param(format!(
            "N(0, sigma²) has Hölder seminorm {base_norm:.4} > L/2 = {:.4}; raise L or sigma",
            big_l / 2.0
        )));
    }
    let kernel = BumpKernel::certified(s);
    let hm = h_max(&kernel, s, big_l, sigma, x0)?;
    let c_tilde = c_tilde_at(hm, &kernel, sigma, x0)?;
    let h = bandwidth_for(eps, c_tilde, sigma, big_l, s);
    let clean = DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base: sigma, h, sign: 0 };
    let shifted = DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base: sigma, h, sign: 1 };
    shifted.validate()?;
    let kl = kl_numeric(&shifted, &clean, KL_TOL)?;
    let eps_certified = talagrand_w2_upper(kl, 1.0 / (sigma * sigma))?;
    if eps_certified > eps * (1.0 + 1e-9) {
        return Err(Error::Budget(format!("certified distance {eps_certified:e} exceeds eps = {eps:e}")));
    }
    let pointwise_gap = big_l * h.powf(s) * kernel.t(0.0);
    Ok(DensityShiftPair { clean, shifted, eps, eps_certified, kl, pointwise_gap, h, h_max: hm, c_tilde, x0 })
}

/// Pair for a configured bump law (its `h` and `sign` are ignored).
pub fn pair_from_spec(spec: &DistributionSpec, eps: f64) -> Result<DensityShiftPair> {
    match spec {
        DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base, .. } => {
            if eps == 0.0 {
                unshifted_pair(*s, *big_l, *sigma_base, *x0)
            } else {
                build_pair(eps, *s, *big_l, *sigma_base, *x0)
            }
        }
        _ => Err(Error::Config("the density problem needs a holder_bump_density law".into())),
    }
}

/// `h = max(n^{-1/(2s+1)}, eps^{1/(s+2)})`.
pub fn bandwidth_select(n: usize, s: f64, eps: f64) -> Result<f64> {
    if n == 0 || !(s > 0.0) || !(eps >= 0.0) {
        return Err(Error::param("bandwidth rule needs n >= 1, s > 0, eps >= 0"));
    }
    Ok((n as f64).powf(-1.0 / (2.0 * s + 1.0)).max(eps.powf(1.0 / (s + 2.0))))
}

/// Gaussian-kernel estimate at `x0` with the bandwidth rule.
pub fn kde_catalog(dist: &DistributionSpec, n: usize, eps: f64) -> Result<Vec<NamedEstimator>> {
    match dist {
        DistributionSpec::HolderBumpDensity { x0, s, .. } => Ok(vec![NamedEstimator::new(
            "kde",
            EstimatorSpec::KernelDensityAt {
                x0: *x0,
                bandwidth: bandwidth_select(n, *s, eps)?,
                kernel: Kernel::Gaussian,
            },
        )]),
        _ => Err(Error::Config("the density problem needs a holder_bump_density law".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeRiskPoint {
    pub n: usize,
    pub bandwidth: f64,
    pub risk: RiskCell,
}

/// Risk of the kernel estimate of the clean density at `x0` from samples of the shifted law.
pub fn kde_risk_curve(
    pair: &DensityShiftPair,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<KdeRiskPoint>> {
    let s = match &pair.clean {
        DistributionSpec::HolderBumpDensity { s, .. } => *s,
        _ => return Err(Error::param("pair must hold bump densities")),
    };
    let loss = pair.loss();
    n_grid
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let h = bandwidth_select(n, s, pair.eps)?;
            let est = EstimatorSpec::KernelDensityAt { x0: pair.x0, bandwidth: h, kernel: Kernel::Gaussian };
            let risk =
                run_cell(&pair.shifted, &est, &PerturbationSpec::Identity, n, &loss, trials, mix(&[seed, idx as u64]))?;
            Ok(KdeRiskPoint { n, bandwidth: h, risk })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::param("slope needs at least two matched points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::param("log-log slope needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(eps: f64) -> DensityShiftPair {
        let l = default_holder_constant(2.0, 1.0);
        build_pair(eps, 2.0, l, 1.0, centered_x0(2.0, l, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn certificate_and_kl_bound() {
        for eps in [0.05, 0.3, 1.0] {
            let p = pair(eps);
            assert!(p.eps_certified <= eps);
            assert!(p.h <= p.h_max * (1.0 + 1e-12));
            let big_l = default_holder_constant(2.0, 1.0);
            let tau = big_l * p.h.powi(2);
            assert!(p.kl <= p.c_tilde * tau * tau * p.h * (1.0 + 1e-9), "eps={eps}");
        }
    }

    #[test]
    fn gap_matches_density_difference() {
        let p = pair(0.2);
        let gap = p.shifted.pdf(p.x0).unwrap() - p.clean.pdf(p.x0).unwrap();
        assert!((gap - p.pointwise_gap).abs() < 1e-15);
    }

    #[test]
    fn gap_scales_with_budget() {
        let eps = [0.1, 0.2, 0.4, 0.8];
        let gaps: Vec<f64> = eps.iter().map(|&e| pair(e).pointwise_gap).collect();
        let slope = loglog_slope(&eps, &gaps).unwrap();
        assert!((slope - 0.8).abs() < 1e-9);
    }

    #[test]
    fn centred_support_is_symmetric() {
        // for larger s the minimal L gives wide bumps that undercut the tails near eps = 1
        for (s, scale) in [(2.0, 1.0), (5.0, 100.0)] {
            let l = scale * default_holder_constant(s, 1.0);
            let x0 = centered_x0(s, l, 1.0).unwrap();
            let p = build_pair(1.0, s, l, 1.0, x0).unwrap();
            assert!((p.h_max + 2.0 * x0).abs() < 1e-9);
            assert!((p.x0 - 0.5 * p.h + p.x0 + 1.5 * p.h).abs() < 1e-9);
        }
    }

    #[test]
    fn off_centre_bump_can_break_positivity() {
        let l = default_holder_constant(2.0, 1.0);
        assert!(build_pair(1.0, 2.0, l, 1.0, 0.0).is_err());
    }

    #[test]
    fn risk_stays_above_half_gap_squared() {
        let p = pair(0.4);
        let pts = kde_risk_curve(&p, &[1024], 300, 3).unwrap();
        assert!(pts[0].risk.mean >= p.pointwise_gap.powi(2) / 4.0);
    }

    #[test]
    fn rejects_budget_above_one() {
        assert!(build_pair(1.5, 2.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rejects_too_small_holder_constant() {
        assert!(build_pair(0.5, 2.0, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn bandwidth_rule() {
        assert!((bandwidth_select(32, 2.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((bandwidth_select(32, 2.0, 0.0625).unwrap() - 0.5).abs() < 1e-15);
        assert!((bandwidth_select(1_000_000, 2.0, 0.0625).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gap_risk_decreases() {
        let p = unshifted_pair(2.0, default_holder_constant(2.0, 1.0), 1.0, 0.0).unwrap();
        let curve = kde_risk_curve(&p, &[50, 400], 2000, 7).unwrap();
        assert!(curve[1].risk.mean < curve[0].risk.mean);
    }
}
