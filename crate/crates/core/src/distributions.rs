//! Data-generating laws: multivariate Gaussian location, uniform and smoothed-uniform
//! location, Gaussian-plus-bump densities on the line, and the Gaussian linear model.
//!
//! Scalar laws expose `pdf`, `cdf`, `quantile` and (where finite) Fisher information.
//! All laws can be sampled through a [`Sampler`], which caches factorizations and tables.

use crate::error::{Error, Result};
use crate::linalg;
use crate::quad::{integrate, integrate_with_breaks, QuadOptions};
use crate::serde_mat::{matrix, vector};
use crate::special::{norm_cdf, norm_ln_pdf, norm_pdf, norm_quantile, INV_SQRT_2PI};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Tail truncation used for Gaussian pieces: the density is below 1e-16 beyond this many scales.
const GAUSS_EFFECTIVE_SD: f64 = 9.0;
const TABLE_POINTS: usize = 4097;
const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// `N(theta, sigma_cov)`. `sigma_cov` may be singular.
    GaussianLocation {
        #[serde(with = "vector")]
        theta: DVector<f64>,
        #[serde(with = "matrix")]
        sigma_cov: DMatrix<f64>,
    },
    /// `U[theta - 1/2, theta + 1/2]`.
    UniformLocation { theta: f64 },
    /// Unit-width uniform whose two edges are replaced by Gaussian tails of mass `tau` each.
    SmoothedUniform { theta: f64, tau: f64 },
    /// `N(0, sigma_base²)` plus `sign · L hˢ T((x - x0)/h)`, with `T` a signed pair of bumps.
    HolderBumpDensity { x0: f64, s: f64, big_l: f64, sigma_base: f64, h: f64, sign: i8 },
    /// `Y = X theta + e`, `e ~ N(0, noise_cov)`.
    LinearModel {
        #[serde(with = "matrix")]
        design: DMatrix<f64>,
        #[serde(with = "vector")]
        theta: DVector<f64>,
        #[serde(with = "matrix")]
        noise_cov: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMode {
    Closed,
    Numeric,
}

impl DistributionSpec {
    pub fn gaussian(theta: Vec<f64>, sigma_cov: DMatrix<f64>) -> Self {
        DistributionSpec::GaussianLocation { theta: DVector::from_vec(theta), sigma_cov }
    }

    pub fn gaussian_1d(mean: f64, sd: f64) -> Self {
        Self::gaussian(vec![mean], DMatrix::from_element(1, 1, sd * sd))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::GaussianLocation { theta, sigma_cov } => {
                if theta.is_empty() {
                    return Err(Error::param("theta must be non-empty"));
                }
                if sigma_cov.nrows() != theta.len() || sigma_cov.ncols() != theta.len() {
                    return Err(Error::dim(format!(
                        "sigma_cov is {}x{} but theta has length {}",
                        sigma_cov.nrows(),
                        sigma_cov.ncols(),
                        theta.len()
                    )));
                }
                linalg::check_psd(sigma_cov, "sigma_cov")
            }
            DistributionSpec::UniformLocation { theta } => finite(*theta, "theta"),
            DistributionSpec::SmoothedUniform { theta, tau } => {
                finite(*theta, "theta")?;
                if !(*tau > 0.0 && *tau <= 0.5) {
                    return Err(Error::param(format!("tau must lie in (0, 1/2], got {tau}")));
                }
                Ok(())
            }
            DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base, h, sign } => {
                finite(*x0, "x0")?;
                for (v, name) in [(*s, "s"), (*big_l, "L"), (*sigma_base, "sigma_base"), (*h, "h")] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::param(format!("{name} must be positive, got {v}")));
                    }
                }
                if !matches!(sign, -1..=1) {
                    return Err(Error::param(format!("sign must be -1, 0 or 1, got {sign}")));
                }
                let lo = (*x0 - 5.0 * sigma_base).min(*x0 - 0.5 * h);
                let hi = (*x0 + 5.0 * sigma_base).max(*x0 + 1.5 * h);
                let grid = 4001;
                for i in 0..grid {
                    let x = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
                    if self.pdf(x)? <= 0.0 {
                        return Err(Error::param(format!("bump density is not positive at x = {x}")));
                    }
                }
                Ok(())
            }
            DistributionSpec::LinearModel { design, theta, noise_cov } => {
                if design.ncols() != theta.len() {
                    return Err(Error::dim(format!(
                        "design has {} columns but theta has length {}",
                        design.ncols(),
                        theta.len()
                    )));
                }
                if noise_cov.nrows() != design.nrows() || noise_cov.ncols() != design.nrows() {
                    return Err(Error::dim("noise_cov must be n x n for an n-row design".to_string()));
                }
                linalg::check_full_column_rank(design)?;
                linalg::check_pd(noise_cov, "noise_cov")
            }
        }
    }

    pub fn is_scalar(&self) -> bool {
        match self {
            DistributionSpec::GaussianLocation { theta, .. } => theta.len() == 1,
            DistributionSpec::LinearModel { .. } => false,
            _ => true,
        }
    }

    /// Number of columns in a sample matrix (the regression response is one column).
    pub fn obs_dim(&self) -> usize {
        match self {
            DistributionSpec::GaussianLocation { theta, .. } => theta.len(),
            _ => 1,
        }
    }

    /// The quantity estimators target: the location, the regression coefficients,
    /// or for bump densities the density value at `x0`.
    pub fn target(&self) -> DVector<f64> {
        match self {
            DistributionSpec::GaussianLocation { theta, .. } | DistributionSpec::LinearModel { theta, .. } => {
                theta.clone()
            }
            DistributionSpec::UniformLocation { theta } | DistributionSpec::SmoothedUniform { theta, .. } => {
                DVector::from_element(1, *theta)
            }
            DistributionSpec::HolderBumpDensity { x0, .. } => {
                DVector::from_element(1, self.pdf(*x0).unwrap_or(f64::NAN))
            }
        }
    }

    fn scalar_gauss(&self) -> Option<(f64, f64)> {
        match self {
            DistributionSpec::GaussianLocation { theta, sigma_cov } if theta.len() == 1 => {
                Some((theta[0], sigma_cov[(0, 0)].sqrt()))
            }
            _ => None,
        }
    }

    fn require_scalar(&self, op: &str) -> Result<()> {
        if self.is_scalar() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{op} is only defined for scalar laws")))
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.require_scalar("pdf")?;
        Ok(match self {
            DistributionSpec::UniformLocation { theta } => {
                if (x - theta).abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::SmoothedUniform { theta, tau } => {
                let d = (x - theta).abs() - (0.5 - tau);
                if d <= 0.0 {
                    1.0
                } else {
                    let y = d / smooth_scale(*tau);
                    (-0.5 * y * y).exp()
                }
            }
            DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base, h, sign } => {
                let base = norm_pdf(x / sigma_base) / sigma_base;
                if *sign == 0 {
                    base
                } else {
                    let k = BumpKernel::certified(*s);
                    base + f64::from(*sign) * big_l * h.powf(*s) * k.t((x - x0) / h)
                }
            }
            _ => {
                let (m, sd) = self.scalar_gauss().expect("scalar gaussian");
                norm_pdf((x - m) / sd) / sd
            }
        })
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        if let Some((m, sd)) = self.scalar_gauss() {
            return Ok(norm_ln_pdf((x - m) / sd) - sd.ln());
        }
        match self {
            DistributionSpec::SmoothedUniform { theta, tau } => {
                let d = (x - theta).abs() - (0.5 - tau);
                let y = d.max(0.0) / smooth_scale(*tau);
                Ok(-0.5 * y * y)
            }
            DistributionSpec::HolderBumpDensity { x0, sigma_base, h, sign, .. } => {
                let ln_base = norm_ln_pdf(x / sigma_base) - sigma_base.ln();
                let u = (x - x0) / h;
                if *sign == 0 || !(-0.5..=1.5).contains(&u) {
                    return Ok(ln_base);
                }
                Ok(self.pdf(x)?.ln())
            }
            _ => Ok(self.pdf(x)?.ln()),
        }
    }

    /// Derivative of the density.
    pub fn pdf_derivative(&self, x: f64) -> Result<f64> {
        self.require_scalar("pdf_derivative")?;
        if let Some((m, sd)) = self.scalar_gauss() {
            let z = (x - m) / sd;
            return Ok(-z * norm_pdf(z) / (sd * sd));
        }
        match self {
            DistributionSpec::UniformLocation { .. } => {
                Err(Error::Unsupported("the uniform density is not differentiable at its edges".into()))
            }
            DistributionSpec::SmoothedUniform { theta, tau } => {
                let u = x - theta;
                let d = u.abs() - (0.5 - tau);
                if d <= 0.0 {
                    return Ok(0.0);
                }
                let b = smooth_scale(*tau);
                let y = d / b;
                Ok(-u.signum() * (y / b) * (-0.5 * y * y).exp())
            }
            DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base, h, sign } => {
                let z = x / sigma_base;
                let base = -z * norm_pdf(z) / (sigma_base * sigma_base);
                if *sign == 0 {
                    return Ok(base);
                }
                let k = BumpKernel::certified(*s);
                Ok(base + f64::from(*sign) * big_l * h.powf(s - 1.0) * k.t_derivative((x - x0) / h))
            }
            _ => unreachable!("scalar laws handled above"),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.require_scalar("cdf")?;
        if let Some((m, sd)) = self.scalar_gauss() {
            return Ok(norm_cdf((x - m) / sd));
        }
        Ok(match self {
            DistributionSpec::UniformLocation { theta } => (x - theta + 0.5).clamp(0.0, 1.0),
            DistributionSpec::SmoothedUniform { theta, tau } => {
                let u = x - theta;
                let knot = 0.5 - tau;
                let b = smooth_scale(*tau);
                if u <= -knot {
                    2.0 * tau * norm_cdf((u + knot) / b)
                } else if u < knot {
                    tau + (u + knot)
                } else {
                    1.0 - 2.0 * tau * norm_cdf(-(u - knot) / b)
                }
            }
            DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base, h, sign } => {
                let base = norm_cdf(x / sigma_base);
                if *sign == 0 {
                    base
                } else {
                    let k = BumpKernel::certified(*s);
                    let u = (x - x0) / h;
                    base + f64::from(*sign) * big_l * h.powf(s + 1.0) * k.t_cumulative(u)?
                }
            }
            _ => unreachable!("scalar laws handled above"),
        })
    }

    /// Quantile function given both `q` and `1 - q`, so upper tails keep full precision.
    fn quantile_pair(&self, q: f64, qc: f64) -> Result<f64> {
        if let Some((m, sd)) = self.scalar_gauss() {
            let z = if q <= 0.5 { norm_quantile(q) } else { -norm_quantile(qc) };
            return Ok(m + sd * z);
        }
        match self {
            DistributionSpec::UniformLocation { theta } => {
                Ok(if q <= 0.5 { theta - 0.5 + q } else { theta + 0.5 - qc })
            }
            DistributionSpec::SmoothedUniform { theta, tau } => {
                let knot = 0.5 - tau;
                let b = smooth_scale(*tau);
                Ok(if q < *tau {
                    theta - knot + b * norm_quantile(q / (2.0 * tau))
                } else if qc < *tau {
                    theta + knot - b * norm_quantile(qc / (2.0 * tau))
                } else {
                    theta - knot + (q - tau)
                })
            }
            DistributionSpec::HolderBumpDensity { .. } => self.quantile_by_bisection(q),
            _ => unreachable!("scalar laws handled above"),
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.require_scalar("quantile")?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param(format!("quantile level must lie in [0, 1], got {q}")));
        }
        self.quantile_pair(q, 1.0 - q)
    }

    /// `F⁻¹(Φ(z))`, evaluated without forming `1 - Φ(z)` for positive `z`.
    pub fn quantile_at_score(&self, z: f64) -> Result<f64> {
        self.require_scalar("quantile")?;
        if let Some((m, sd)) = self.scalar_gauss() {
            return Ok(m + sd * z);
        }
        self.quantile_pair(norm_cdf(z), norm_cdf(-z))
    }

    fn quantile_by_bisection(&self, q: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.effective_support();
        let width = hi - lo;
        while self.cdf(lo)? > q {
            lo -= width;
        }
        while self.cdf(hi)? < q {
            hi += width;
            if hi - lo > 1e6 * width {
                return Ok(hi);
            }
        }
        while hi - lo > QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Exact support, possibly infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistributionSpec::UniformLocation { theta } => (theta - 0.5, theta + 0.5),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// A finite interval holding all but a negligible amount of mass.
    pub fn effective_support(&self) -> (f64, f64) {
        if let Some((m, sd)) = self.scalar_gauss() {
            return (m - GAUSS_EFFECTIVE_SD * sd, m + GAUSS_EFFECTIVE_SD * sd);
        }
        match self {
            DistributionSpec::UniformLocation { theta } => (theta - 0.5, theta + 0.5),
            DistributionSpec::SmoothedUniform { theta, tau } => {
                let w = 0.5 - tau + GAUSS_EFFECTIVE_SD * smooth_scale(*tau);
                (theta - w, theta + w)
            }
            DistributionSpec::HolderBumpDensity { x0, sigma_base, h, .. } => (
                (-GAUSS_EFFECTIVE_SD * sigma_base).min(x0 - 0.5 * h),
                (GAUSS_EFFECTIVE_SD * sigma_base).max(x0 + 1.5 * h),
            ),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            DistributionSpec::UniformLocation { theta } => vec![theta - 0.5, theta + 0.5],
            DistributionSpec::SmoothedUniform { theta, tau } => vec![theta - 0.5 + tau, theta + 0.5 - tau],
            DistributionSpec::HolderBumpDensity { x0, h, sign, .. } if *sign != 0 => {
                vec![x0 - 0.5 * h, x0 + 0.5 * h, x0 + 1.5 * h]
            }
            _ => Vec::new(),
        }
    }

    /// Probability levels where the quantile function is not smooth.
    pub fn quantile_breakpoints(&self) -> Result<Vec<f64>> {
        match self {
            DistributionSpec::SmoothedUniform { tau, .. } => Ok(vec![*tau, 1.0 - tau]),
            DistributionSpec::HolderBumpDensity { .. } => self.breakpoints().into_iter().map(|x| self.cdf(x)).collect(),
            _ => Ok(Vec::new()),
        }
    }

    pub fn fisher_info(&self, mode: FisherMode) -> Result<f64> {
        self.require_scalar("fisher_info")?;
        if let (Some((_, sd)), FisherMode::Closed) = (self.scalar_gauss(), mode) {
            return Ok(1.0 / (sd * sd));
        }
        match (self, mode) {
            (DistributionSpec::UniformLocation { .. }, _) => {
                Err(Error::Unsupported("the uniform location family has no finite Fisher information".into()))
            }
            (DistributionSpec::SmoothedUniform { tau, .. }, FisherMode::Closed) => Ok(std::f64::consts::PI / tau),
            (DistributionSpec::HolderBumpDensity { .. }, FisherMode::Closed) => {
                Err(Error::Unsupported("no closed form for bump densities; use FisherMode::Numeric".into()))
            }
            _ => {
                let (lo, hi) = self.effective_support();
                let q = integrate_with_breaks(
                    |x| {
                        let d = self.pdf_derivative(x).unwrap_or(f64::NAN);
                        let f = self.pdf(x).unwrap_or(f64::NAN);
                        if d == 0.0 {
                            0.0
                        } else {
                            d * d / f
                        }
                    },
                    lo,
                    hi,
                    &self.breakpoints(),
                    QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 4000 },
                )?;
                Ok(q.value)
            }
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match self {
            DistributionSpec::GaussianLocation { theta, sigma_cov } => {
                Sampler::Gaussian { mean: theta.clone(), factor: linalg::psd_factor(sigma_cov)? }
            }
            DistributionSpec::UniformLocation { theta } => Sampler::Uniform { theta: *theta },
            DistributionSpec::SmoothedUniform { theta, tau } => Sampler::Smoothed { theta: *theta, tau: *tau },
            DistributionSpec::HolderBumpDensity { .. } => Sampler::Table(QuantileTable::build(self)?),
            DistributionSpec::LinearModel { design, theta, noise_cov } => {
                Sampler::Linear { mean: design * theta, factor: linalg::psd_factor(noise_cov)? }
            }
        })
    }

    /// Draws an `n x obs_dim` sample. For the linear model `n` must equal the design rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        self.sampler()?.sample(n, rng)
    }
}

fn finite(v: f64, name: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be finite")))
    }
}

/// Scale of the Gaussian tails of the smoothed uniform: `2 tau K(0)`.
pub fn smooth_scale(tau: f64) -> f64 {
    2.0 * tau * INV_SQRT_2PI
}

#[derive(Debug, Clone)]
pub enum Sampler {
    Gaussian { mean: DVector<f64>, factor: DMatrix<f64> },
    Uniform { theta: f64 },
    Smoothed { theta: f64, tau: f64 },
    Table(QuantileTable),
    Linear { mean: DVector<f64>, factor: DMatrix<f64> },
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        Ok(match self {
            Sampler::Gaussian { mean, factor } => {
                let p = mean.len();
                let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mut cols = factor * z;
                for mut c in cols.column_iter_mut() {
                    c += mean;
                }
                cols.transpose()
            }
            Sampler::Uniform { theta } => DMatrix::from_fn(n, 1, |_, _| theta - 0.5 + rng.random::<f64>()),
            Sampler::Smoothed { theta, tau } => {
                let knot = 0.5 - tau;
                let b = smooth_scale(*tau);
                DMatrix::from_fn(n, 1, |_, _| {
                    let u: f64 = rng.random();
                    if u < 1.0 - 2.0 * tau {
                        theta - knot + 2.0 * knot * rng.random::<f64>()
                    } else {
                        let z: f64 = rng.sample(StandardNormal);
                        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        theta + side * (knot + b * z.abs())
                    }
                })
            }
            Sampler::Table(t) => DMatrix::from_fn(n, 1, |_, _| t.invert(rng.random())),
            Sampler::Linear { mean, factor } => {
                if n != mean.len() {
                    return Err(Error::dim(format!("linear model has {} rows, cannot draw {n}", mean.len())));
                }
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = mean + factor * z;
                DMatrix::from_column_slice(n, 1, y.as_slice())
            }
        })
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolant of `x` as a function of `F(x)`,
/// tabulated at Chebyshev-spaced abscissae over the effective support.
#[derive(Debug, Clone)]
pub struct QuantileTable {
    probs: Vec<f64>,
    xs: Vec<f64>,
    slopes: Vec<f64>,
}

impl QuantileTable {
    pub fn build(spec: &DistributionSpec) -> Result<Self> {
        let (lo, hi) = spec.effective_support();
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut probs = Vec::with_capacity(TABLE_POINTS);
        let mut xs = Vec::with_capacity(TABLE_POINTS);
        for k in 0..TABLE_POINTS {
            let x = mid - half * (std::f64::consts::PI * k as f64 / (TABLE_POINTS - 1) as f64).cos();
            let f = spec.cdf(x)?;
            if probs.last().is_none_or(|&last| f > last) {
                probs.push(f);
                xs.push(x);
            }
        }
        if probs.len() < 2 {
            return Err(Error::param("cdf is flat over the effective support"));
        }
        let slopes = fritsch_carlson(&probs, &xs);
        Ok(QuantileTable { probs, xs, slopes })
    }

    pub fn invert(&self, u: f64) -> f64 {
        let m = self.probs.len();
        if u <= self.probs[0] {
            return self.xs[0];
        }
        if u >= self.probs[m - 1] {
            return self.xs[m - 1];
        }
        let i = self.probs.partition_point(|&p| p <= u) - 1;
        let (p0, p1) = (self.probs[i], self.probs[i + 1]);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let hgap = p1 - p0;
        let t = (u - p0) / hgap;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + t) * hgap * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * hgap * self.slopes[i + 1]
    }
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let delta: Vec<f64> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut d = vec![0.0; m];
    d[0] = delta[0];
    d[m - 1] = delta[m - 2];
    for i in 1..m - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d
}

/// Rescaled mollifier `K_b(u) = a exp(-1/(1 - (2u)²))` on `|u| < 1/2`, with `a` the largest
/// constant for which `K_b` stays in the Hölder ball of radius 1/4 on a dense grid.
#[derive(Debug, Clone, Copy)]
pub struct BumpKernel {
    pub s: f64,
    pub a: f64,
    mass: f64,
}

const CERT_GRID: usize = 1201;

impl BumpKernel {
    pub fn certified(s: f64) -> BumpKernel {
        static CACHE: OnceLock<Mutex<HashMap<u64, BumpKernel>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(k) = cache.lock().expect("kernel cache").get(&s.to_bits()) {
            return *k;
        }
        let l = holder_order(s);
        let grid: Vec<f64> = (0..CERT_GRID).map(|i| -0.5 + i as f64 / (CERT_GRID - 1) as f64).collect();
        let d: Vec<f64> = grid.iter().map(|&u| 2f64.powi(l as i32) * mollifier_derivative(l, 2.0 * u)).collect();
        let seminorm = holder_seminorm(&grid, &d, s - l as f64);
        let a = 0.25 / seminorm;
        let mass = integrate(|u| mollifier_derivative(0, 2.0 * u), -0.5, 0.5, QuadOptions::abs(1e-15))
            .map(|q| a * q.value)
            .unwrap_or(f64::NAN);
        let k = BumpKernel { s, a, mass };
        cache.lock().expect("kernel cache").insert(s.to_bits(), k);
        k
    }

    pub fn kb(&self, u: f64) -> f64 {
        self.a * mollifier_derivative(0, 2.0 * u)
    }

    pub fn kb_derivative(&self, u: f64) -> f64 {
        2.0 * self.a * mollifier_derivative(1, 2.0 * u)
    }

    /// `T(u) = K_b(u) - K_b(u - 1)`.
    pub fn t(&self, u: f64) -> f64 {
        self.kb(u) - self.kb(u - 1.0)
    }

    pub fn t_derivative(&self, u: f64) -> f64 {
        self.kb_derivative(u) - self.kb_derivative(u - 1.0)
    }

    /// `∫ K_b`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn kb_cumulative(&self, v: f64) -> Result<f64> {
        if v <= -0.5 {
            return Ok(0.0);
        }
        if v >= 0.5 {
            return Ok(self.mass);
        }
        let q = integrate(|u| self.kb(u), -0.5, v, QuadOptions::abs(1e-16))?;
        Ok(q.value)
    }

    /// `∫_{-∞}^{u} T`.
    pub fn t_cumulative(&self, u: f64) -> Result<f64> {
        Ok(self.kb_cumulative(u)? - self.kb_cumulative(u - 1.0)?)
    }

    /// `∫ T² = 2 ∫ K_b²`.
    pub fn t_squared_integral(&self) -> Result<f64> {
        let q = integrate(|u| self.kb(u).powi(2), -0.5, 0.5, QuadOptions::abs(1e-16))?;
        Ok(2.0 * q.value)
    }
}

/// Number of derivatives controlled by the Hölder class of order `s`: the largest
/// integer strictly below `s`.
pub fn holder_order(s: f64) -> usize {
    (s.ceil() - 1.0).max(0.0) as usize
}

/// Largest difference quotient `|d_i - d_j| / |x_i - x_j|^alpha` over all grid pairs.
pub fn holder_seminorm(grid: &[f64], values: &[f64], alpha: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let q = (values[i] - values[j]).abs() / (grid[j] - grid[i]).abs().powf(alpha);
            best = best.max(q);
        }
    }
    best
}

/// Hölder seminorm of the `l`-th derivative of the `N(0, sigma²)` density, on a grid
/// over `±10 sigma`.
pub fn gaussian_holder_seminorm(s: f64, sigma: f64) -> f64 {
    let l = holder_order(s);
    let grid: Vec<f64> = (0..CERT_GRID).map(|i| sigma * (-10.0 + 20.0 * i as f64 / (CERT_GRID - 1) as f64)).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let z = x / sigma;
            let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * hermite_he(l, z) * norm_pdf(z) / sigma.powi(l as i32 + 1)
        })
        .collect();
    holder_seminorm(&grid, &values, s - l as f64)
}

fn hermite_he(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `k`-th derivative of `exp(-1/(1 - v²))` (zero outside `(-1, 1)`).
///
/// Writing the derivative as `P_k(v) (1 - v²)^{-2k} exp(-1/(1 - v²))`, the polynomials obey
/// `P_{k+1} = P_k' (1 - v²)² + (4k v (1 - v²) - 2v) P_k`.
pub fn mollifier_derivative(k: usize, v: f64) -> f64 {
    if v.abs() >= 1.0 {
        return 0.0;
    }
    let p = mollifier_poly(k);
    let w = 1.0 - v * v;
    let poly: f64 = p.iter().rev().fold(0.0, |acc, &c| acc * v + c);
    poly * (-1.0 / w - 2.0 * k as f64 * w.ln()).exp()
}

fn mollifier_poly(k: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for j in 0..k {
        let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect();
        // (1 - v²)² = 1 - 2v² + v⁴
        let a = poly_mul(&dp, &[1.0, 0.0, -2.0, 0.0, 1.0]);
        // 4j v (1 - v²) - 2v = (4j - 2) v - 4j v³
        let jf = j as f64;
        let b = poly_mul(&p, &[0.0, 4.0 * jf - 2.0, 0.0, -4.0 * jf]);
        let n = a.len().max(b.len());
        p = (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0)).collect();
    }
    p
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
