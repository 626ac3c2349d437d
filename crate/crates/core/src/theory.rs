//! Closed-form minimax risks, upper and lower bounds, Bayes risks and generic lower-bound tools.

use crate::error::{Error, Result};
use crate::linalg;
use crate::perturbations::{ids_parameters, Problem, ShiftClass};
use crate::transport::SMOOTHED_UNIFORM_W2_CONST;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

/// Constant in the uniform IDS lower bound. It is a rounded-down value of `1/(π c^{1/3})`,
/// with `c` the smoothed-uniform transport constant.
pub const UNIFORM_IDS_CONST: f64 = 0.614;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBound {
    pub problem: Problem,
    pub shift_class: ShiftClass,
    pub eps: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub exact: Option<f64>,
    /// True when the values are rates with unspecified constants.
    pub rate_only: bool,
}

impl TheoryBound {
    fn exact(problem: Problem, shift_class: ShiftClass, eps: f64, value: f64) -> Self {
        TheoryBound {
            problem,
            shift_class,
            eps,
            lower: Some(value),
            upper: Some(value),
            exact: Some(value),
            rate_only: false,
        }
    }

    fn sandwich(problem: Problem, shift_class: ShiftClass, eps: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        TheoryBound { problem, shift_class, eps, lower, upper, exact: None, rate_only: false }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("eps must be finite and non-negative, got {eps}")))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::param("n must be positive"))
    } else {
        Ok(())
    }
}

/// Minimax squared-error risk for Gaussian location with `trace = trΣ`.
pub fn location_risk(class: ShiftClass, eps: f64, n: usize, trace: f64) -> Result<f64> {
    check_eps(eps)?;
    check_n(n)?;
    if !(trace.is_finite() && trace >= 0.0) {
        return Err(Error::param("trace must be non-negative"));
    }
    let nf = n as f64;
    Ok(match class {
        ShiftClass::Cds => eps * eps + trace / nf,
        ShiftClass::Ids if n > 1 => {
            let m = nf - 1.0;
            if eps * eps <= trace / (m * m) {
                (eps + trace.sqrt()).powi(2) / nf
            } else {
                eps * eps + trace / m
            }
        }
        _ => (eps + (trace / nf).sqrt()).powi(2),
    })
}

pub fn location_bound(class: ShiftClass, eps: f64, n: usize, sigma_cov: &DMatrix<f64>) -> Result<TheoryBound> {
    linalg::check_psd(sigma_cov, "sigma_cov")?;
    let v = location_risk(class, eps, n, sigma_cov.trace())?;
    Ok(TheoryBound::exact(Problem::Location, class, eps, v))
}

/// `Tr[Σ P_{X,Σ}] = Tr[X (XᵀΣ⁻¹X)⁻¹ Xᵀ]`.
pub fn gls_prediction_trace(design: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<f64> {
    let cov = linalg::gls_covariance(design, noise_cov)?;
    Ok((design * cov * design.transpose()).trace())
}

/// Exact minimax prediction risk `(eps + √(Tr[ΣP]/n))²` for the linear model.
pub fn lr_prediction_risk(eps: f64, design: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<f64> {
    check_eps(eps)?;
    let n = design.nrows() as f64;
    Ok((eps + (gls_prediction_trace(design, noise_cov)? / n).sqrt()).powi(2))
}

/// Lower and upper bounds on the minimax squared error of the coefficients.
pub fn lr_squared_bounds(eps: f64, design: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_eps(eps)?;
    let n = design.nrows() as f64;
    let smin = linalg::sigma_min(design);
    let gls_cov = linalg::gls_covariance(design, noise_cov)?;
    let t = gls_prediction_trace(design, noise_cov)?;
    let bayes = (1.0 + eps * (n / t).sqrt()).powi(2) * gls_cov.trace();
    let modulus = n * eps * eps / (smin * smin);
    let gram_inv = linalg::spd_inverse(&(design.transpose() * design), "XᵀX")?;
    let ls_var = (noise_cov * design * &gram_inv * &gram_inv * design.transpose()).trace();
    let upper = (eps * n.sqrt() / smin + ls_var.sqrt()).powi(2);
    Ok((bayes.max(modulus), upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrLoss {
    Prediction,
    Squared,
}

pub fn lr_bound(loss: LrLoss, eps: f64, design: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<TheoryBound> {
    Ok(match loss {
        LrLoss::Prediction => TheoryBound::exact(
            Problem::LinearRegression,
            ShiftClass::Jds,
            eps,
            lr_prediction_risk(eps, design, noise_cov)?,
        ),
        LrLoss::Squared => {
            let (lo, hi) = lr_squared_bounds(eps, design, noise_cov)?;
            TheoryBound::sandwich(Problem::LinearRegression, ShiftClass::Jds, eps, Some(lo), Some(hi))
        }
    })
}

/// Budget below which the extreme-midrange beats the sample mean for the uniform location
/// family: `[√(3/n) - √(18/((n+2)(n+1)))] / [6(√n - 1)]`, and 0 for `n = 1`.
pub fn uniform_switch_threshold(n: usize) -> Result<f64> {
    check_n(n)?;
    if n == 1 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok(((3.0 / nf).sqrt() - (18.0 / ((nf + 2.0) * (nf + 1.0))).sqrt()) / (6.0 * (nf.sqrt() - 1.0)))
}

/// Risk of the extreme-midrange without shift: `1 / (2(n+1)(n+2))`.
pub fn uniform_clean_risk(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (2.0 * (nf + 1.0) * (nf + 2.0))
}

pub fn uniform_jds_upper(eps: f64, n: usize) -> Result<f64> {
    check_eps(eps)?;
    let nf = n as f64;
    Ok(if eps <= uniform_switch_threshold(n)? {
        (eps * nf.sqrt() + uniform_clean_risk(n).sqrt()).powi(2)
    } else {
        (eps + 1.0 / (12.0 * nf).sqrt()).powi(2)
    })
}

pub fn uniform_ids_lower(eps: f64, n: usize) -> Result<f64> {
    check_eps(eps)?;
    check_n(n)?;
    let nf = n as f64;
    let local = (UNIFORM_IDS_CONST * eps.powf(2.0 / 3.0) / nf).min(1.0 / (2.0 * PI * nf));
    Ok(local.max(eps * eps + uniform_clean_risk(n)))
}

pub fn uniform_bounds(class: ShiftClass, eps: f64, n: usize) -> Result<TheoryBound> {
    check_eps(eps)?;
    check_n(n)?;
    Ok(match class {
        ShiftClass::Cds => TheoryBound::exact(Problem::Uniform, class, eps, eps * eps + uniform_clean_risk(n)),
        ShiftClass::Ids | ShiftClass::Jds => TheoryBound::sandwich(
            Problem::Uniform,
            class,
            eps,
            Some(uniform_ids_lower(eps, n)?),
            Some(uniform_jds_upper(eps, n)?),
        ),
    })
}

/// Rates (constants dropped) for pointwise density estimation over a Hölder class of order `s`.
/// The lower rate is only available for `eps <= 1`.
pub fn density_bounds(eps: f64, n: usize, s: f64) -> Result<TheoryBound> {
    check_eps(eps)?;
    check_n(n)?;
    if !(s > 0.0) {
        return Err(Error::param("smoothness s must be positive"));
    }
    let nf = n as f64;
    let stat = nf.powf(-2.0 * s / (2.0 * s + 1.0));
    let lower = (eps <= 1.0).then(|| stat.max(eps.powf(4.0 * s / (2.0 * s + 1.0))));
    let upper = stat.max(eps.powf(2.0 * s / (s + 2.0)));
    Ok(TheoryBound {
        problem: Problem::Density,
        shift_class: ShiftClass::Ids,
        eps,
        lower,
        upper: Some(upper),
        exact: None,
        rate_only: true,
    })
}

/// Budget at which the bounds' rates match: `n^{-(s+2)/(2s+1)}`.
pub fn density_agreement_threshold(n: usize, s: f64) -> f64 {
    (n as f64).powf(-(s + 2.0) / (2.0 * s + 1.0))
}

/// Tail mass of the smoothed uniform at transport distance `eps` from the uniform, capped at 1/2.
pub fn smoothed_uniform_tau(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok((eps * eps / SMOOTHED_UNIFORM_W2_CONST).powf(1.0 / 3.0).min(0.5))
}

/// Budget where the tail mass reaches its cap of 1/2: `√(c/8)`.
pub fn smoothed_uniform_cap() -> f64 {
    (SMOOTHED_UNIFORM_W2_CONST / 8.0).sqrt()
}

/// Cramér-Rao bound `τ/(nπ)` for the smoothed uniform at budget `eps`; constant `1/(2πn)` past the cap.
pub fn crlb_smoothed_uniform(eps: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    Ok(smoothed_uniform_tau(eps)? / (n as f64 * PI))
}

/// Posterior covariance trace of the Bayes estimator under the least-favorable shift with a
/// `N(0, b² I)` prior. `b = ∞` gives the flat-prior limit.
///
/// For IDS the posterior is a mixture whose weights depend on the data at finite `b`,
/// so only the limit is available there.
pub fn bayes_posterior_location(
    eps: f64,
    n: usize,
    sigma_cov: &DMatrix<f64>,
    b: f64,
    class: ShiftClass,
) -> Result<f64> {
    check_eps(eps)?;
    check_n(n)?;
    linalg::check_psd(sigma_cov, "sigma_cov")?;
    if !(b > 0.0) {
        return Err(Error::param("prior scale b must be positive"));
    }
    let trace = sigma_cov.trace();
    let nf = n as f64;
    let eig = linalg::sym_eigenvalues(sigma_cov);
    let mix = |inflate: f64| -> f64 {
        eig.iter()
            .map(|&l| {
                let v = l.max(0.0) * inflate * inflate;
                if b.is_infinite() {
                    v / nf
                } else {
                    v / (v / (b * b) + nf)
                }
            })
            .sum()
    };
    match class {
        ShiftClass::Cds => {
            // The least-favorable common shift is spread over the sphere; in the limit the
            // risk is that of an additional mean error of size eps.
            if b.is_infinite() {
                Ok(eps * eps + trace / nf)
            } else {
                Err(Error::Unsupported("finite-b Bayes risk is only tabulated for JDS".into()))
            }
        }
        ShiftClass::Ids if n > 1 => {
            if !b.is_infinite() {
                return Err(Error::Unsupported(
                    "the IDS posterior mixes components with data-dependent weights at finite b".into(),
                ));
            }
            let (zeta, psi) = ids_parameters(eps, n, trace);
            Ok(mix(1.0 + zeta) + psi * psi)
        }
        _ => {
            let xi = eps * (nf / trace).sqrt();
            Ok(mix(1.0 + xi))
        }
    }
}

/// Bayes risk for the linear model under the least-favorable projection shift with a
/// `N(0, b² I)` prior on the coefficients; `b = ∞` gives the flat-prior limit.
pub fn lr_bayes(eps: f64, design: &DMatrix<f64>, noise_cov: &DMatrix<f64>, b: f64, loss: LrLoss) -> Result<f64> {
    check_eps(eps)?;
    if !(b > 0.0) {
        return Err(Error::param("prior scale b must be positive"));
    }
    let n = design.nrows() as f64;
    let p = design.ncols();
    let t = gls_prediction_trace(design, noise_cov)?;
    let kappa = eps * (n / t).sqrt();
    let si = linalg::spd_inverse(noise_cov, "noise_cov")?;
    let mut precision = design.transpose() * si * design / (1.0 + kappa).powi(2);
    if b.is_finite() {
        precision += DMatrix::identity(p, p) / (b * b);
    }
    let post = linalg::spd_inverse(&precision, "posterior precision")?;
    Ok(match loss {
        LrLoss::Squared => post.trace(),
        LrLoss::Prediction => (design * post * design.transpose()).trace() / n,
    })
}

/// Moduli of continuity `(m_i(eps), m(eps)) = (2 eps, eps)` for Gaussian location.
pub fn modulus_location_family(eps: f64) -> Result<(f64, f64)> {
    check_eps(eps)?;
    Ok((2.0 * eps, eps))
}

/// Loss shape `Φ` applied to a distance.
#[derive(Debug, Clone, Copy)]
pub enum Phi {
    Identity,
    Square,
    Custom(fn(f64) -> f64),
}

impl Phi {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Phi::Identity => x,
            Phi::Square => x * x,
            Phi::Custom(f) => f(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LowerBoundTool {
    /// `max(Φ(eps)/2, M(0))` from the modulus of continuity.
    ModulusLocation { eps: f64, m0: f64 },
    /// Two-point bound for `N(θ, σ²)` with `n` observations.
    LeCamGauss1d { eps: f64, sigma: f64, n: usize },
    /// Fano bound for `N(θ, σ² I_p)`; needs `p >= 2`.
    FanoGauss { eps: f64, sigma: f64, n: usize, p: usize },
    /// Assouad bound for squared error in `N(θ, σ² I_p)`.
    AssouadGauss { eps: f64, sigma: f64, n: usize, p: usize },
    /// Rate for nonparametric regression of smoothness `s`.
    NonparamReg { eps: f64, sigma: f64, n: usize, s: f64 },
    /// Fano bound for the coefficients of a linear model; needs `p >= 23`.
    FanoLrSquared { eps: f64, sigma: f64, design: DMatrix<f64> },
    /// Fano bound for linear-model prediction; needs `p >= 2`.
    FanoLrPrediction { eps: f64, sigma: f64, n: usize, p: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolBound {
    pub value: f64,
    pub rate_only: bool,
}

pub fn lower_bound(tool: &LowerBoundTool, phi: Phi) -> Result<ToolBound> {
    let exact = |value: f64| Ok(ToolBound { value, rate_only: false });
    match *tool {
        LowerBoundTool::ModulusLocation { eps, m0 } => {
            check_eps(eps)?;
            exact((phi.eval(eps) / 2.0).max(m0))
        }
        LowerBoundTool::LeCamGauss1d { eps, sigma, n } => {
            check_eps(eps)?;
            check_n(n)?;
            exact(phi.eval(eps + sigma / (2.0 * (n as f64).sqrt())) / 4.0)
        }
        LowerBoundTool::FanoGauss { eps, sigma, n, p } => {
            check_eps(eps)?;
            check_n(n)?;
            if p < 2 {
                return Err(Error::param("Fano bound needs p >= 2"));
            }
            let r = eps + sigma * ((p as f64 - 2.0) * LN_2 / (4.0 * n as f64)).sqrt();
            exact(0.5 * phi.eval(r / 4.0))
        }
        LowerBoundTool::AssouadGauss { eps, sigma, n, p } => {
            check_eps(eps)?;
            check_n(n)?;
            exact(eps * eps / 4.0 + sigma * sigma * p as f64 / (32.0 * n as f64))
        }
        LowerBoundTool::NonparamReg { eps, sigma, n, s } => {
            check_eps(eps)?;
            check_n(n)?;
            let r = (n as f64 / (sigma * sigma)).powf(-s / (2.0 * s + 1.0));
            Ok(ToolBound { value: phi.eval(eps).max(phi.eval(r)), rate_only: true })
        }
        LowerBoundTool::FanoLrSquared { eps, sigma, ref design } => {
            check_eps(eps)?;
            let (n, p) = design.shape();
            if p < 23 {
                return Err(Error::param("the coefficient Fano bound needs p >= 23"));
            }
            let nf = n as f64;
            let scale = linalg::spectral_norm(&(design / nf.sqrt()));
            let r = (8.0 * eps + sigma * (2.0 * (p as f64 - 16.0 * LN_2) / nf).sqrt()) / (16.0 * scale);
            exact(0.5 * phi.eval(r))
        }
        LowerBoundTool::FanoLrPrediction { eps, sigma, n, p } => {
            check_eps(eps)?;
            check_n(n)?;
            if p < 2 {
                return Err(Error::param("Fano bound needs p >= 2"));
            }
            let r = (2.0 * eps + sigma * ((p as f64 - 1.0) / (4.0 * n as f64)).sqrt()) / 8.0;
            exact(phi.eval(r) / 3.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn location_values() {
        assert!((location_risk(ShiftClass::Jds, 0.5, 4, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((location_risk(ShiftClass::Cds, 0.5, 4, 1.0).unwrap() - 0.5).abs() < 1e-15);
        // Transition at eps = √T/(n-1) = 1/3.
        let below = location_risk(ShiftClass::Ids, 1.0 / 3.0 - 1e-12, 4, 1.0).unwrap();
        let above = location_risk(ShiftClass::Ids, 1.0 / 3.0 + 1e-12, 4, 1.0).unwrap();
        assert!((below - 4.0 / 9.0).abs() < 1e-10 && (above - 4.0 / 9.0).abs() < 1e-10);
    }

    #[test]
    fn single_observation_ids_is_jds() {
        let a = location_risk(ShiftClass::Ids, 0.3, 1, 2.0).unwrap();
        let b = location_risk(ShiftClass::Jds, 0.3, 1, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_threshold_values() {
        assert_eq!(uniform_switch_threshold(1).unwrap(), 0.0);
        let c50 = uniform_switch_threshold(50).unwrap();
        assert!((c50 - 0.004_462_5).abs() < 1e-6);
        assert!((uniform_clean_risk(50) - 1.0 / 5304.0).abs() < 1e-18);
    }

    #[test]
    fn crlb_is_continuous_at_the_cap() {
        let cap = smoothed_uniform_cap();
        let a = crlb_smoothed_uniform(cap * (1.0 - 1e-9), 10).unwrap();
        let b = crlb_smoothed_uniform(cap * (1.0 + 1e-9), 10).unwrap();
        assert!((a - b).abs() < 1e-9 * b);
        assert!((b - 1.0 / (20.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn uniform_constant_is_conservative() {
        let exact = 1.0 / (PI * SMOOTHED_UNIFORM_W2_CONST.powf(1.0 / 3.0));
        assert!(exact >= UNIFORM_IDS_CONST);
        assert!(exact - UNIFORM_IDS_CONST < 1e-3);
    }

    #[test]
    fn bayes_limits_match_minimax() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])) / 6.0;
        for eps in [0.05, 0.2, 1.0] {
            for class in [ShiftClass::Ids, ShiftClass::Jds] {
                let b = bayes_posterior_location(eps, 10, &s, f64::INFINITY, class).unwrap();
                let m = location_risk(class, eps, 10, 1.0).unwrap();
                assert!((b / m - 1.0).abs() < 1e-12, "{class} eps={eps}");
            }
        }
    }

    #[test]
    fn tool_requirements() {
        let phi = Phi::Square;
        assert!(lower_bound(&LowerBoundTool::FanoGauss { eps: 0.1, sigma: 1.0, n: 5, p: 1 }, phi).is_err());
        let design = DMatrix::identity(10, 10);
        assert!(lower_bound(&LowerBoundTool::FanoLrSquared { eps: 0.1, sigma: 1.0, design }, phi).is_err());
        let nr = lower_bound(&LowerBoundTool::NonparamReg { eps: 0.1, sigma: 1.0, n: 100, s: 2.0 }, phi).unwrap();
        assert!(nr.rate_only);
    }

    proptest! {
        #[test]
        fn shift_classes_are_ordered(eps in 0.0f64..3.0, n in 1usize..60, trace in 0.01f64..10.0) {
            let c = location_risk(ShiftClass::Cds, eps, n, trace).unwrap();
            let i = location_risk(ShiftClass::Ids, eps, n, trace).unwrap();
            let j = location_risk(ShiftClass::Jds, eps, n, trace).unwrap();
            prop_assert!(c <= i * (1.0 + 1e-12));
            prop_assert!(i <= j * (1.0 + 1e-12));
        }

        #[test]
        fn risks_increase_in_eps(e1 in 0.0f64..2.0, de in 0.0f64..1.0, n in 2usize..40) {
            for class in ShiftClass::ALL {
                let a = location_risk(class, e1, n, 1.0).unwrap();
                let b = location_risk(class, e1 + de, n, 1.0).unwrap();
                prop_assert!(a <= b * (1.0 + 1e-12));
            }
            let a = uniform_jds_upper(e1, n).unwrap();
            let b = uniform_jds_upper(e1 + de, n).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }

        #[test]
        fn uniform_lower_below_upper(eps in 0.0f64..2.0, n in 2usize..200) {
            prop_assert!(uniform_ids_lower(eps, n).unwrap() <= uniform_jds_upper(eps, n).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn modulus_sandwich(eps in 0.0f64..5.0) {
            let (mi, m) = modulus_location_family(eps).unwrap();
            let (_, m2) = modulus_location_family(2.0 * eps).unwrap();
            prop_assert!(m <= mi && mi <= m2);
        }

        #[test]
        fn jds_bayes_increases_to_limit(eps in 0.0f64..1.0, b in 0.1f64..50.0) {
            let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])) / 6.0;
            let small = bayes_posterior_location(eps, 10, &s, b, ShiftClass::Jds).unwrap();
            let large = bayes_posterior_location(eps, 10, &s, 2.0 * b, ShiftClass::Jds).unwrap();
            let lim = bayes_posterior_location(eps, 10, &s, f64::INFINITY, ShiftClass::Jds).unwrap();
            prop_assert!(small <= large && large <= lim * (1.0 + 1e-12));
        }
    }
}
