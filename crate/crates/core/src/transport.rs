//! Wasserstein-2 distances, coupling costs, KL divergence and the Talagrand transport bound.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::special::{norm_cdf, norm_pdf, norm_quantile};
use nalgebra::{DMatrix, DVector};

/// `W₂²` between the smoothed uniform with tail mass `tau` and the uniform, divided by `tau³`:
/// `2 (6 - 6√2 + π) / (3π)`.
pub const SMOOTHED_UNIFORM_W2_CONST: f64 =
    2.0 * (6.0 - 6.0 * std::f64::consts::SQRT_2 + std::f64::consts::PI) / (3.0 * std::f64::consts::PI);

/// Normal scores beyond this contribute nothing representable to the quantile integrals.
const SCORE_LIMIT: f64 = 30.0;
const TAIL_LEVEL: f64 = 1e-3;

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Closed-form `W₂` between `N(m1, s1)` and `N(m2, s2)` (covariances may be singular).
pub fn w2_gaussian(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let p = m1.len();
    if m2.len() != p || s1.shape() != (p, p) || s2.shape() != (p, p) {
        return Err(Error::dim("Gaussian W2 arguments disagree in dimension"));
    }
    crate::linalg::check_psd(s1, "first covariance")?;
    crate::linalg::check_psd(s2, "second covariance")?;
    let r1 = sym_sqrt(s1);
    let cross = sym_sqrt(&(&r1 * s2 * &r1));
    let bures = (s1 + s2 - 2.0 * cross).trace();
    Ok(((m1 - m2).norm_squared() + bures.max(0.0)).sqrt())
}

/// `W₂` between two scalar laws by quadrature of `(F⁻¹ - G⁻¹)²` over `(0, 1)`.
///
/// The two tails `q < 10⁻³` and `q > 1 - 10⁻³` are integrated in normal-score coordinates
/// `q = Φ(z)`, which keeps Gaussian-type tails well resolved. The returned value has
/// absolute error below `quad_tol` when the integral converges.
pub fn w2_1d(p: &DistributionSpec, q: &DistributionSpec, quad_tol: f64) -> Result<f64> {
    if !(p.is_scalar() && q.is_scalar()) {
        return Err(Error::Unsupported("w2_1d needs scalar laws".into()));
    }
    if !(quad_tol > 0.0) {
        return Err(Error::param("quad_tol must be positive"));
    }
    let opts = QuadOptions { abs_tol: quad_tol * quad_tol / 3.0, rel_tol: 1e-12, max_intervals: 8000 };
    let mut breaks = p.quantile_breakpoints()?;
    breaks.extend(q.quantile_breakpoints()?);

    let centre = integrate_with_breaks(
        |u| {
            let d = p.quantile(u).unwrap_or(f64::NAN) - q.quantile(u).unwrap_or(f64::NAN);
            d * d
        },
        TAIL_LEVEL,
        1.0 - TAIL_LEVEL,
        &breaks,
        opts,
    )?;
    let z_edge = norm_quantile(TAIL_LEVEL);
    let score_breaks: Vec<f64> =
        breaks.iter().flat_map(|&b| [norm_quantile(b), -norm_quantile(b)]).filter(|z| z.is_finite()).collect();
    let tail_integrand = |z: f64| {
        let d = p.quantile_at_score(z).unwrap_or(f64::NAN) - q.quantile_at_score(z).unwrap_or(f64::NAN);
        d * d * norm_pdf(z)
    };
    let lower = integrate_with_breaks(tail_integrand, -SCORE_LIMIT, z_edge, &score_breaks, opts)?;
    let upper = integrate_with_breaks(tail_integrand, -z_edge, SCORE_LIMIT, &score_breaks, opts)?;
    let total = centre.value + lower.value + upper.value;
    if !total.is_finite() {
        return Err(Error::Quadrature("non-finite quantile integrand".into()));
    }
    Ok(total.max(0.0).sqrt())
}

/// `√(c τ³)`: closed-form `W₂` between the smoothed and the plain uniform.
pub fn w2_smoothed_uniform_closed(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(Error::param(format!("tau must lie in (0, 1/2], got {tau}")));
    }
    Ok((SMOOTHED_UNIFORM_W2_CONST * tau.powi(3)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCost {
    pub mean: f64,
    pub std_error: f64,
    pub within_budget: bool,
}

impl CouplingCost {
    /// `mean <= budget + 3 SE`, with a relative allowance for rounding.
    pub fn from_moments(mean: f64, std_error: f64, budget: f64) -> Self {
        let within_budget = mean <= budget + 3.0 * std_error + 1e-12 * budget.abs().max(f64::MIN_POSITIVE);
        CouplingCost { mean, std_error, within_budget }
    }
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Average over rows of `‖X'ᵢ - Xᵢ‖²`, for a row-wise pairing of two samples.
pub fn empirical_coupling_cost(clean: &DMatrix<f64>, perturbed: &DMatrix<f64>, budget: f64) -> Result<CouplingCost> {
    if clean.shape() != perturbed.shape() {
        return Err(Error::dim(format!(
            "clean sample is {:?} but perturbed is {:?}",
            clean.shape(),
            perturbed.shape()
        )));
    }
    let costs: Vec<f64> = (0..clean.nrows()).map(|i| (perturbed.row(i) - clean.row(i)).norm_squared()).collect();
    let (mean, se) = mean_and_se(&costs);
    Ok(CouplingCost::from_moments(mean, se, budget))
}

/// `(X'_(j) - X_(j))²` for the `j`-th order statistics (1-based) of two scalar samples.
pub fn order_statistic_coupling_cost(clean: &[f64], perturbed: &[f64], j: usize) -> Result<f64> {
    if clean.len() != perturbed.len() || j == 0 || j > clean.len() {
        return Err(Error::param("order statistic index out of range"));
    }
    let mut a = clean.to_vec();
    let mut b = perturbed.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok((a[j - 1] - b[j - 1]).powi(2))
}

/// `KL(p ‖ q)` by quadrature over the union of effective supports.
pub fn kl_numeric(p: &DistributionSpec, q: &DistributionSpec, quad_tol: f64) -> Result<f64> {
    if !(p.is_scalar() && q.is_scalar()) {
        return Err(Error::Unsupported("kl_numeric needs scalar laws".into()));
    }
    let (a1, b1) = p.effective_support();
    let (qa, qb) = q.support();
    let mut breaks = p.breakpoints();
    breaks.extend(q.breakpoints());
    // Any p-mass outside the support of q makes the divergence infinite.
    let (sa, sb) = p.support();
    if sa < qa || sb > qb {
        let outside_mass = p.cdf(qa)? + (1.0 - p.cdf(qb)?);
        if outside_mass > 0.0 {
            return Err(Error::SupportViolation("p puts mass where q has none".into()));
        }
    }
    let violation = std::cell::Cell::new(false);
    let res = integrate_with_breaks(
        |x| {
            let px = p.pdf(x).unwrap_or(0.0);
            if px <= 0.0 {
                return 0.0;
            }
            let lq = q.ln_pdf(x).unwrap_or(f64::NEG_INFINITY);
            if lq < (1e-300f64).ln() {
                violation.set(true);
                return 0.0;
            }
            px * (p.ln_pdf(x).unwrap_or(f64::NEG_INFINITY) - lq)
        },
        a1,
        b1,
        &breaks,
        QuadOptions { abs_tol: quad_tol, rel_tol: 1e-12, max_intervals: 8000 },
    )?;
    if violation.get() {
        return Err(Error::SupportViolation("q vanishes where p is positive".into()));
    }
    Ok(res.value.max(0.0))
}

/// Talagrand's transport inequality for a `rho`-strongly log-concave reference:
/// `W₂ ≤ √(2 KL / rho)`.
pub fn talagrand_w2_upper(kl: f64, rho: f64) -> Result<f64> {
    if kl < 0.0 || !(rho > 0.0) {
        return Err(Error::param("talagrand bound needs kl >= 0 and rho > 0"));
    }
    Ok((2.0 * kl / rho).sqrt())
}

/// Mass of `N(0,1)` below `z`: re-exported for callers building score grids.
pub fn score_level(z: f64) -> f64 {
    norm_cdf(z)
}
