//! Point estimators. Each one maps an `n x d` sample (or an `n x 1` response) to a vector.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::perturbations::Problem;
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::serde_mat::matrix;
use crate::special::norm_pdf;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => norm_pdf(u),
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    SampleMean,
    CoordinatewiseMedian,
    /// `(X_(k) + X_(n-k+1)) / 2` per coordinate.
    Midrange {
        k: usize,
    },
    /// Midrange of the extremes when `eps` is below the switching threshold, else the sample mean.
    SwitchingUniform {
        eps: f64,
    },
    LeastSquares {
        #[serde(with = "matrix")]
        design: DMatrix<f64>,
    },
    GeneralizedLeastSquares {
        #[serde(with = "matrix")]
        design: DMatrix<f64>,
        #[serde(with = "matrix")]
        noise_cov: DMatrix<f64>,
    },
    /// Kernel density estimate at `x0`.
    KernelDensityAt {
        x0: f64,
        bandwidth: f64,
        kernel: Kernel,
    },
    /// Posterior mean of the location under a flat prior; `base_density` is the law at location 0.
    Pitman1D {
        base_density: Box<DistributionSpec>,
        quad_tol: f64,
    },
}

impl EstimatorSpec {
    pub fn prepare(&self) -> Result<Estimator> {
        let kind = match self {
            EstimatorSpec::SampleMean => Kind::Mean,
            EstimatorSpec::CoordinatewiseMedian => Kind::Median,
            EstimatorSpec::Midrange { k } => {
                if *k == 0 {
                    return Err(Error::param("midrange order k must be at least 1"));
                }
                Kind::Midrange(*k)
            }
            EstimatorSpec::SwitchingUniform { eps } => {
                if !(eps.is_finite() && *eps >= 0.0) {
                    return Err(Error::param("eps must be finite and non-negative"));
                }
                Kind::Switching(*eps)
            }
            EstimatorSpec::LeastSquares { design } => {
                linalg::check_full_column_rank(design)?;
                Kind::Linear(ls_operator(design)?)
            }
            EstimatorSpec::GeneralizedLeastSquares { design, noise_cov } => {
                linalg::check_full_column_rank(design)?;
                if noise_cov.shape() != (design.nrows(), design.nrows()) {
                    return Err(Error::dim("noise_cov must be n x n"));
                }
                let chol = noise_cov
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::Singular("noise_cov is not positive definite".into()))?;
                let l = chol.l();
                let whitened_design = l.solve_lower_triangular(design).expect("triangular solve");
                let a = ls_operator(&whitened_design)?;
                let linv = l
                    .solve_lower_triangular(&DMatrix::identity(design.nrows(), design.nrows()))
                    .expect("triangular solve");
                Kind::Linear(a * linv)
            }
            EstimatorSpec::KernelDensityAt { x0, bandwidth, kernel } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(Error::param("bandwidth must be positive"));
                }
                Kind::Kde { x0: *x0, h: *bandwidth, kernel: *kernel }
            }
            EstimatorSpec::Pitman1D { base_density, quad_tol } => {
                if !base_density.is_scalar() {
                    return Err(Error::Unsupported("Pitman estimator needs a scalar base law".into()));
                }
                base_density.validate()?;
                if !(*quad_tol > 0.0) {
                    return Err(Error::param("quad_tol must be positive"));
                }
                Kind::Pitman { base: (**base_density).clone(), tol: *quad_tol }
            }
        };
        Ok(Estimator { kind })
    }

    pub fn estimate(&self, sample: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.prepare()?.estimate(sample)
    }
}

/// `(XᵀX)⁻¹Xᵀ` through a QR factorization.
fn ls_operator(design: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = design.ncols();
    let qr = design.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Singular("design is rank deficient".into()))?;
    Ok(rinv * q.transpose())
}

#[derive(Debug, Clone)]
enum Kind {
    Mean,
    Median,
    Midrange(usize),
    Switching(f64),
    Linear(DMatrix<f64>),
    Kde { x0: f64, h: f64, kernel: Kernel },
    Pitman { base: DistributionSpec, tol: f64 },
}

/// An estimator with factorizations computed once.
#[derive(Debug, Clone)]
pub struct Estimator {
    kind: Kind,
}

impl Estimator {
    pub fn estimate(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::param("empty sample"));
        }
        match &self.kind {
            Kind::Mean => Ok(x.row_mean().transpose()),
            Kind::Median => Ok(per_column(x, median)),
            Kind::Midrange(k) => {
                if *k > n.div_ceil(2) {
                    return Err(Error::param(format!("midrange order {k} exceeds ceil(n/2) for n = {n}")));
                }
                Ok(per_column(x, |c| midrange(c, *k)))
            }
            Kind::Switching(eps) => {
                if *eps <= crate::theory::uniform_switch_threshold(n)? {
                    Ok(per_column(x, |c| midrange(c, 1)))
                } else {
                    Ok(x.row_mean().transpose())
                }
            }
            Kind::Linear(a) => {
                if x.ncols() != 1 || a.ncols() != n {
                    return Err(Error::dim(format!("response must be {} x 1, got {} x {}", a.ncols(), n, x.ncols())));
                }
                Ok(a * x.column(0))
            }
            Kind::Kde { x0, h, kernel } => {
                if x.ncols() != 1 {
                    return Err(Error::dim("kernel density estimate needs scalar observations"));
                }
                let s: f64 = x.iter().map(|&xi| kernel.eval((xi - x0) / h)).sum();
                Ok(DVector::from_element(1, s / (n as f64 * h)))
            }
            Kind::Pitman { base, tol } => {
                if x.ncols() != 1 {
                    return Err(Error::dim("Pitman estimator needs scalar observations"));
                }
                Ok(DVector::from_element(1, pitman(base, x.as_slice(), *tol)?))
            }
        }
    }
}

fn per_column(x: &DMatrix<f64>, f: impl Fn(&mut [f64]) -> f64) -> DVector<f64> {
    let mut buf = vec![0.0; x.nrows()];
    DVector::from_fn(x.ncols(), |j, _| {
        buf.copy_from_slice(x.column(j).as_slice());
        f(&mut buf)
    })
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let (lo, mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        mid
    } else {
        let below = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + mid)
    }
}

fn midrange(v: &mut [f64], k: usize) -> f64 {
    let n = v.len();
    let lo = *v.select_nth_unstable_by(k - 1, f64::total_cmp).1;
    let hi = *v.select_nth_unstable_by(n - k, f64::total_cmp).1;
    0.5 * (lo + hi)
}

fn pitman(base: &DistributionSpec, x: &[f64], tol: f64) -> Result<f64> {
    let (slo, shi) = base.support();
    let (elo, ehi) = base.effective_support();
    let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let centre = 0.5 * (xmin + xmax);
    let half = 0.5 * (ehi - elo) + 10.0 * sd;
    // u must keep every x_i - u inside the support of the base law.
    let lo = (centre - half).max(xmax - shi);
    let hi = (centre + half).min(xmin - slo);
    if !(lo < hi) {
        if lo == hi {
            return Ok(lo);
        }
        return Err(Error::SupportViolation("sample is incompatible with the base law".into()));
    }
    let loglik = |u: f64| -> f64 { x.iter().map(|&xi| base.ln_pdf(xi - u).unwrap_or(f64::NEG_INFINITY)).sum() };
    let grid: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    let (arg, peak) =
        grid.iter()
            .map(|&u| (u, loglik(u)))
            .fold((lo, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !peak.is_finite() {
        return Err(Error::SupportViolation("likelihood vanishes on the bracket".into()));
    }
    // Seed the subdivision finely so a narrow likelihood is not missed by the first rule.
    let step = (hi - lo) / 200.0;
    let mut breaks: Vec<f64> = grid.iter().copied().filter(|u| (u - arg).abs() <= 3.0 * step).collect();
    for b in base.breakpoints() {
        breaks.extend(x.iter().map(|xi| xi - b));
    }
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: tol, max_intervals: 20_000 };
    let w = |u: f64| (loglik(u) - peak).exp();
    let z = integrate_with_breaks(w, lo, hi, &breaks, opts)?;
    let m = integrate_with_breaks(
        |u| (u - centre) * w(u),
        lo,
        hi,
        &breaks,
        QuadOptions { abs_tol: tol * z.value * (hi - lo), ..opts },
    )?;
    Ok(centre + m.value / z.value)
}

/// Named estimator, as listed in risk tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimator {
    pub label: String,
    pub spec: EstimatorSpec,
}

impl NamedEstimator {
    pub fn new(label: impl Into<String>, spec: EstimatorSpec) -> Self {
        NamedEstimator { label: label.into(), spec }
    }
}

/// The estimators compared in the simulation tables for each problem.
/// The density problem needs a bandwidth and is handled by the density module.
pub fn estimator_catalog(problem: Problem, dist: &DistributionSpec, n: usize) -> Result<Vec<NamedEstimator>> {
    match (problem, dist) {
        (Problem::Location, _) => Ok(vec![
            NamedEstimator::new("mean", EstimatorSpec::SampleMean),
            NamedEstimator::new("median", EstimatorSpec::CoordinatewiseMedian),
        ]),
        (Problem::LinearRegression, DistributionSpec::LinearModel { design, noise_cov, .. }) => Ok(vec![
            NamedEstimator::new("least_squares", EstimatorSpec::LeastSquares { design: design.clone() }),
            NamedEstimator::new(
                "generalized_least_squares",
                EstimatorSpec::GeneralizedLeastSquares { design: design.clone(), noise_cov: noise_cov.clone() },
            ),
        ]),
        (Problem::Uniform, _) => {
            let mut out: Vec<NamedEstimator> = (1..=n / 2)
                .map(|k| NamedEstimator::new(format!("midrange_k{k}"), EstimatorSpec::Midrange { k }))
                .collect();
            out.push(NamedEstimator::new("mean", EstimatorSpec::SampleMean));
            out.push(NamedEstimator::new("median", EstimatorSpec::CoordinatewiseMedian));
            Ok(out)
        }
        (Problem::Density, _) => {
            Err(Error::Unsupported("density estimators depend on the bandwidth rule; use density::kde_catalog".into()))
        }
        _ => Err(Error::Config(format!("distribution does not fit problem {problem}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn order_statistic_estimators() {
        let x = col(&[5.0, 1.0, 4.0, 2.0, 3.0, 10.0]);
        assert_eq!(EstimatorSpec::Midrange { k: 1 }.estimate(&x).unwrap()[0], 5.5);
        assert_eq!(EstimatorSpec::Midrange { k: 2 }.estimate(&x).unwrap()[0], 3.5);
        assert_eq!(EstimatorSpec::Midrange { k: 3 }.estimate(&x).unwrap()[0], 3.5);
        assert_eq!(EstimatorSpec::CoordinatewiseMedian.estimate(&x).unwrap()[0], 3.5);
        assert!(EstimatorSpec::Midrange { k: 4 }.estimate(&x).is_err());
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let design = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let theta = DVector::from_vec(vec![0.5, -2.0]);
        let y = &design * &theta;
        let y = col(y.as_slice());
        let ls = EstimatorSpec::LeastSquares { design: design.clone() }.estimate(&y).unwrap();
        let noise = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let gls = EstimatorSpec::GeneralizedLeastSquares { design, noise_cov: noise }.estimate(&y).unwrap();
        assert!((ls - &theta).amax() < 1e-12);
        assert!((gls - &theta).amax() < 1e-12);
    }

    #[test]
    fn gls_matches_normal_equations() {
        let design = DMatrix::from_row_slice(5, 2, &[1.0, 0.3, 1.0, -1.0, 1.0, 2.0, 1.0, 0.7, 1.0, -0.4]);
        let noise = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5, 4.0, 1.5]));
        let y = DVector::from_vec(vec![0.2, -1.0, 3.0, 0.5, 0.1]);
        let si = noise.clone().try_inverse().unwrap();
        let direct = (design.transpose() * &si * &design).try_inverse().unwrap() * design.transpose() * &si * &y;
        let est =
            EstimatorSpec::GeneralizedLeastSquares { design, noise_cov: noise }.estimate(&col(y.as_slice())).unwrap();
        assert!((est - direct).amax() < 1e-12);
    }

    #[test]
    fn pitman_for_uniform_is_midrange() {
        let base = DistributionSpec::UniformLocation { theta: 0.0 };
        let x = base.sample(50, &mut stream(8)).unwrap().map(|v| v + 3.0);
        let est = EstimatorSpec::Pitman1D { base_density: Box::new(base), quad_tol: 1e-10 }.estimate(&x).unwrap();
        let mr = EstimatorSpec::Midrange { k: 1 }.estimate(&x).unwrap();
        assert!((est[0] - mr[0]).abs() < 1e-6);
    }

    #[test]
    fn pitman_for_gaussian_is_mean() {
        let base = DistributionSpec::gaussian_1d(0.0, 1.0);
        let x = base.sample(30, &mut stream(9)).unwrap().map(|v| v - 1.5);
        let est = EstimatorSpec::Pitman1D { base_density: Box::new(base), quad_tol: 1e-10 }.estimate(&x).unwrap();
        let mean = x.mean();
        assert!((est[0] - mean).abs() < 1e-6);
    }

    #[test]
    fn kde_of_single_point() {
        let x = col(&[0.0]);
        let est =
            EstimatorSpec::KernelDensityAt { x0: 0.0, bandwidth: 0.5, kernel: Kernel::Gaussian }.estimate(&x).unwrap();
        assert!((est[0] - 2.0 * norm_pdf(0.0)).abs() < 1e-15);
    }

    fn equivariant_specs() -> Vec<EstimatorSpec> {
        vec![
            EstimatorSpec::SampleMean,
            EstimatorSpec::CoordinatewiseMedian,
            EstimatorSpec::Midrange { k: 1 },
            EstimatorSpec::Midrange { k: 3 },
        ]
    }

    proptest! {
        #[test]
        fn location_equivariance(values in proptest::collection::vec(-10.0f64..10.0, 6..20), c in -5.0f64..5.0) {
            let x = col(&values);
            let shifted = x.map(|v| v + c);
            for spec in equivariant_specs() {
                let a = spec.estimate(&x).unwrap()[0];
                let b = spec.estimate(&shifted).unwrap()[0];
                prop_assert!((b - a - c).abs() < 1e-9, "{:?}", spec);
            }
        }

        #[test]
        fn permutation_invariance(values in proptest::collection::vec(-10.0f64..10.0, 6..20), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut perm = values.clone();
            perm.shuffle(&mut stream(seed));
            for spec in equivariant_specs() {
                let a = spec.estimate(&col(&values)).unwrap()[0];
                let b = spec.estimate(&col(&perm)).unwrap()[0];
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
