//! Shift mechanisms, the least-favorable perturbations for each shift class, per-problem
//! catalogs, and Monte Carlo checks of the coupling budget.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{trial_stream, Stream};
use crate::serde_mat::vector;
use crate::transport::{empirical_coupling_cost, mean_and_se, CouplingCost};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShiftClass {
    /// Common shift applied to every observation.
    #[serde(rename = "CDS")]
    Cds,
    /// Each observation shifted independently.
    #[serde(rename = "IDS")]
    Ids,
    /// Arbitrary joint shift of the whole sample.
    #[serde(rename = "JDS")]
    Jds,
}

impl ShiftClass {
    pub const ALL: [ShiftClass; 3] = [ShiftClass::Cds, ShiftClass::Ids, ShiftClass::Jds];

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftClass::Cds => "CDS",
            ShiftClass::Ids => "IDS",
            ShiftClass::Jds => "JDS",
        }
    }
}

impl fmt::Display for ShiftClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Location,
    LinearRegression,
    Uniform,
    Density,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Location => "location",
            Problem::LinearRegression => "linear_regression",
            Problem::Uniform => "uniform",
            Problem::Density => "density",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projector {
    /// Orthogonal projector onto the column space of the design.
    Ols,
    /// The `Σ⁻¹`-weighted projector `X (XᵀΣ⁻¹X)⁻¹ XᵀΣ⁻¹`.
    Gls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    /// `X'ᵢ = Xᵢ + delta` for every row.
    ConstantShift {
        #[serde(with = "vector")]
        delta: DVector<f64>,
    },
    /// `X'ᵢ = Xᵢ + eps u`, with `u` uniform on the unit sphere and drawn once per sample.
    RandomDirectionConstantShift {
        eps: f64,
    },
    /// `X'ᵢ = Xᵢ + zeta (Xᵢ - theta) + psi delta`, `delta` uniform on `{±e_j}` and drawn once per sample.
    IdsLeastFavorable {
        zeta: f64,
        psi: f64,
    },
    /// `X'ᵢ = Xᵢ + xi (X̄ - theta)`.
    JdsMeanShift {
        xi: f64,
    },
    /// `Y' = Y + magnitude · direction`, `direction` a unit vector in `ℝⁿ`.
    LrConstantShift {
        #[serde(with = "vector")]
        direction: DVector<f64>,
        magnitude: f64,
    },
    /// `Y' = Y + kappa (P Y - X theta)`.
    LrPredictionShift {
        kappa: f64,
        projector: Projector,
    },
    /// `X'ᵢ = Xᵢ - eps √(n/k)` for the `k` smallest observations.
    OrderStatTailShift {
        k: usize,
        eps: f64,
    },
    Identity,
}

impl PerturbationSpec {
    pub fn shift_class(&self) -> ShiftClass {
        match self {
            PerturbationSpec::ConstantShift { .. }
            | PerturbationSpec::RandomDirectionConstantShift { .. }
            | PerturbationSpec::LrConstantShift { .. }
            | PerturbationSpec::Identity => ShiftClass::Cds,
            PerturbationSpec::IdsLeastFavorable { .. } => ShiftClass::Ids,
            PerturbationSpec::JdsMeanShift { .. }
            | PerturbationSpec::LrPredictionShift { .. }
            | PerturbationSpec::OrderStatTailShift { .. } => ShiftClass::Jds,
        }
    }

    /// Binds the mechanism to a law and sample size, precomputing projectors.
    pub fn prepare(&self, dist: &DistributionSpec, n: usize) -> Result<Perturbation> {
        let dim = dist.obs_dim();
        let op = match self {
            PerturbationSpec::ConstantShift { delta } => {
                if delta.len() != dim {
                    return Err(Error::dim(format!("shift has length {} but observations have {dim}", delta.len())));
                }
                Op::Constant(delta.clone())
            }
            PerturbationSpec::RandomDirectionConstantShift { eps } => {
                nonneg(*eps, "eps")?;
                Op::RandomDirection(*eps)
            }
            PerturbationSpec::IdsLeastFavorable { zeta, psi } => {
                nonneg(*zeta, "zeta")?;
                nonneg(*psi, "psi")?;
                Op::Ids { zeta: *zeta, psi: *psi, theta: location_theta(dist)? }
            }
            PerturbationSpec::JdsMeanShift { xi } => {
                nonneg(*xi, "xi")?;
                Op::MeanShift { xi: *xi, theta: location_theta(dist)? }
            }
            PerturbationSpec::LrConstantShift { direction, magnitude } => {
                let (design, _, _) = linear_parts(dist)?;
                if direction.len() != design.nrows() {
                    return Err(Error::dim(format!(
                        "direction has length {} but the design has {} rows",
                        direction.len(),
                        design.nrows()
                    )));
                }
                let norm = direction.norm();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::param(format!("direction must be a unit vector, norm is {norm}")));
                }
                Op::Additive(direction * *magnitude)
            }
            PerturbationSpec::LrPredictionShift { kappa, projector } => {
                nonneg(*kappa, "kappa")?;
                let (design, theta, noise) = linear_parts(dist)?;
                let proj = match projector {
                    Projector::Ols => linalg::ols_projector(design)?,
                    Projector::Gls => linalg::gls_projector(design, noise)?,
                };
                Op::Projection { kappa: *kappa, proj, mean: design * theta }
            }
            PerturbationSpec::OrderStatTailShift { k, eps } => {
                nonneg(*eps, "eps")?;
                if dim != 1 {
                    return Err(Error::Unsupported("order-statistic shifts need scalar observations".into()));
                }
                if *k == 0 || *k > n {
                    return Err(Error::param(format!("k must lie in 1..={n}, got {k}")));
                }
                Op::Tail { k: *k, amount: eps * (n as f64 / *k as f64).sqrt() }
            }
            PerturbationSpec::Identity => Op::Identity,
        };
        Ok(Perturbation { op })
    }

    /// One-shot application; prefer [`PerturbationSpec::prepare`] inside loops.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        dist: &DistributionSpec,
        clean: &DMatrix<f64>,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        self.prepare(dist, clean.nrows())?.apply(clean, rng)
    }
}

fn nonneg(v: f64, name: &str) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be finite and non-negative, got {v}")))
    }
}

fn location_theta(dist: &DistributionSpec) -> Result<DVector<f64>> {
    match dist {
        DistributionSpec::LinearModel { .. } | DistributionSpec::HolderBumpDensity { .. } => {
            Err(Error::Unsupported("this perturbation needs a location family".into()))
        }
        _ => Ok(dist.target()),
    }
}

fn linear_parts(dist: &DistributionSpec) -> Result<(&DMatrix<f64>, &DVector<f64>, &DMatrix<f64>)> {
    match dist {
        DistributionSpec::LinearModel { design, theta, noise_cov } => Ok((design, theta, noise_cov)),
        _ => Err(Error::Unsupported("this perturbation needs a linear model".into())),
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant(DVector<f64>),
    RandomDirection(f64),
    Ids { zeta: f64, psi: f64, theta: DVector<f64> },
    MeanShift { xi: f64, theta: DVector<f64> },
    Additive(DVector<f64>),
    Projection { kappa: f64, proj: DMatrix<f64>, mean: DVector<f64> },
    Tail { k: usize, amount: f64 },
    Identity,
}

/// A perturbation bound to a law and sample size.
#[derive(Debug, Clone)]
pub struct Perturbation {
    op: Op,
}

impl Perturbation {
    pub fn apply<R: Rng + ?Sized>(&self, clean: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
        let mut x = clean.clone();
        match &self.op {
            Op::Constant(delta) => add_to_rows(&mut x, delta)?,
            Op::RandomDirection(eps) => {
                let mut u = DVector::from_fn(x.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = u.norm();
                u *= eps / norm;
                add_to_rows(&mut x, &u)?;
            }
            Op::Ids { zeta, psi, theta } => {
                check_width(&x, theta.len())?;
                let p = x.ncols();
                let axis = rng.random_range(0..p);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for mut row in x.row_iter_mut() {
                    for j in 0..p {
                        row[j] += zeta * (row[j] - theta[j]);
                    }
                    row[axis] += sign * psi;
                }
            }
            Op::MeanShift { xi, theta } => {
                check_width(&x, theta.len())?;
                let mean = clean.row_mean().transpose();
                add_to_rows(&mut x, &((mean - theta) * *xi))?;
            }
            Op::Additive(v) => {
                if x.shape() != (v.len(), 1) {
                    return Err(Error::dim("response must be an n x 1 column".to_string()));
                }
                x.column_mut(0).axpy(1.0, v, 1.0);
            }
            Op::Projection { kappa, proj, mean } => {
                if x.shape() != (mean.len(), 1) {
                    return Err(Error::dim("response must be an n x 1 column".to_string()));
                }
                let y = clean.column(0);
                let resid = proj * y - mean;
                x.column_mut(0).axpy(*kappa, &resid, 1.0);
            }
            Op::Tail { k, amount } => {
                if x.ncols() != 1 || *k > x.nrows() {
                    return Err(Error::dim("tail shift needs a scalar sample of size >= k".to_string()));
                }
                let mut sorted: Vec<f64> = clean.iter().copied().collect();
                let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
                let cut = *kth;
                for v in x.iter_mut() {
                    if *v <= cut {
                        *v -= amount;
                    }
                }
            }
            Op::Identity => {}
        }
        Ok(x)
    }
}

fn check_width(x: &DMatrix<f64>, p: usize) -> Result<()> {
    if x.ncols() != p {
        return Err(Error::dim(format!("sample has {} columns, expected {p}", x.ncols())));
    }
    Ok(())
}

fn add_to_rows(x: &mut DMatrix<f64>, v: &DVector<f64>) -> Result<()> {
    check_width(x, v.len())?;
    for mut row in x.row_iter_mut() {
        row += v.transpose();
    }
    Ok(())
}

/// IDS least-favorable parameters `(zeta, psi)`; they satisfy `zeta² trΣ + psi² = eps²`.
pub fn ids_parameters(eps: f64, n: usize, trace: f64) -> (f64, f64) {
    let cap = 1.0 / (n as f64 - 1.0);
    let zeta = (eps * eps / trace).sqrt().min(cap);
    let psi = (eps * eps - trace * cap * cap).max(0.0).sqrt();
    (zeta, psi)
}

/// Least-favorable perturbation for Gaussian location estimation within a shift class.
/// With a single observation IDS and JDS coincide and the JDS construction is used.
pub fn least_favorable_location(
    class: ShiftClass,
    eps: f64,
    n: usize,
    sigma_cov: &DMatrix<f64>,
) -> Result<PerturbationSpec> {
    nonneg(eps, "eps")?;
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let trace = sigma_cov.trace();
    if !(trace > 0.0) {
        return Err(Error::param("trace of the covariance must be positive"));
    }
    Ok(match class {
        ShiftClass::Cds => PerturbationSpec::RandomDirectionConstantShift { eps },
        ShiftClass::Ids if n > 1 => {
            let (zeta, psi) = ids_parameters(eps, n, trace);
            PerturbationSpec::IdsLeastFavorable { zeta, psi }
        }
        _ => PerturbationSpec::JdsMeanShift { xi: eps * (n as f64 / trace).sqrt() },
    })
}

/// `kappa = eps √(n / Tr[Σ P])` for the chosen projector; it makes `E‖Y' - Y‖² = n eps²`.
pub fn lr_kappa(eps: f64, design: &DMatrix<f64>, noise_cov: &DMatrix<f64>, projector: Projector) -> Result<f64> {
    let proj = match projector {
        Projector::Ols => linalg::ols_projector(design)?,
        Projector::Gls => linalg::gls_projector(design, noise_cov)?,
    };
    let t = (noise_cov * proj).trace();
    Ok(eps * (design.nrows() as f64 / t).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub label: String,
    pub spec: PerturbationSpec,
}

impl CatalogEntry {
    pub fn new(label: impl Into<String>, spec: PerturbationSpec) -> Self {
        CatalogEntry { label: label.into(), spec }
    }

    pub fn class(&self) -> ShiftClass {
        self.spec.shift_class()
    }
}

/// The perturbations used in the simulation tables for each problem at budget `eps`.
pub fn catalog(problem: Problem, eps: f64, dist: &DistributionSpec, n: usize) -> Result<Vec<CatalogEntry>> {
    nonneg(eps, "eps")?;
    match (problem, dist) {
        (Problem::Location, DistributionSpec::GaussianLocation { sigma_cov, theta }) => {
            let p = theta.len();
            let mut e1 = DVector::zeros(p);
            e1[0] = eps;
            let diag = DVector::from_element(p, eps / (p as f64).sqrt());
            let mut out = vec![
                CatalogEntry::new("cds_e1", PerturbationSpec::ConstantShift { delta: e1 }),
                CatalogEntry::new("cds_diagonal", PerturbationSpec::ConstantShift { delta: diag }),
            ];
            if n > 1 {
                out.push(CatalogEntry::new(
                    "ids_least_favorable",
                    least_favorable_location(ShiftClass::Ids, eps, n, sigma_cov)?,
                ));
            }
            out.push(CatalogEntry::new(
                "jds_mean_shift",
                least_favorable_location(ShiftClass::Jds, eps, n, sigma_cov)?,
            ));
            Ok(out)
        }
        (Problem::LinearRegression, DistributionSpec::LinearModel { design, noise_cov, .. }) => {
            let rows = design.nrows();
            let magnitude = (rows as f64).sqrt() * eps;
            let mut e1 = DVector::zeros(rows);
            e1[0] = 1.0;
            let ones = DVector::from_element(rows, 1.0 / (rows as f64).sqrt());
            let (v, smin) = linalg::smallest_right_singular(design)?;
            let u = design * v / smin;
            let u = &u / u.norm();
            Ok(vec![
                CatalogEntry::new("lr_const_e1", PerturbationSpec::LrConstantShift { direction: e1, magnitude }),
                CatalogEntry::new("lr_const_ones", PerturbationSpec::LrConstantShift { direction: ones, magnitude }),
                CatalogEntry::new(
                    "lr_proj_ols",
                    PerturbationSpec::LrPredictionShift {
                        kappa: lr_kappa(eps, design, noise_cov, Projector::Ols)?,
                        projector: Projector::Ols,
                    },
                ),
                CatalogEntry::new(
                    "lr_proj_gls",
                    PerturbationSpec::LrPredictionShift {
                        kappa: lr_kappa(eps, design, noise_cov, Projector::Gls)?,
                        projector: Projector::Gls,
                    },
                ),
                CatalogEntry::new(
                    "lr_const_min_singular",
                    PerturbationSpec::LrConstantShift { direction: u, magnitude },
                ),
            ])
        }
        (Problem::Uniform, DistributionSpec::UniformLocation { .. } | DistributionSpec::SmoothedUniform { .. }) => {
            let mut out: Vec<CatalogEntry> = (1..=n / 2)
                .map(|k| CatalogEntry::new(format!("tail_shift_k{k}"), PerturbationSpec::OrderStatTailShift { k, eps }))
                .collect();
            out.push(CatalogEntry::new(
                "constant_shift",
                PerturbationSpec::ConstantShift { delta: DVector::from_element(1, eps) },
            ));
            Ok(out)
        }
        (Problem::Density, DistributionSpec::HolderBumpDensity { .. }) => {
            Ok(vec![CatalogEntry::new("bump_pair", PerturbationSpec::Identity)])
        }
        _ => Err(Error::Config(format!("distribution {} does not fit problem {problem}", kind_name(dist)))),
    }
}

pub(crate) fn kind_name(dist: &DistributionSpec) -> &'static str {
    match dist {
        DistributionSpec::GaussianLocation { .. } => "gaussian_location",
        DistributionSpec::UniformLocation { .. } => "uniform_location",
        DistributionSpec::SmoothedUniform { .. } => "smoothed_uniform",
        DistributionSpec::HolderBumpDensity { .. } => "holder_bump_density",
        DistributionSpec::LinearModel { .. } => "linear_model",
    }
}

/// Monte Carlo estimate of the per-row coupling cost `E (1/n) Σ ‖X'ᵢ - Xᵢ‖²`, compared with
/// the per-row budget `eps²`. Each trial contributes one average; the standard error is across trials.
pub fn budget_check(
    dist: &DistributionSpec,
    spec: &PerturbationSpec,
    n: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<CouplingCost> {
    if trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let sampler = dist.sampler()?;
    let pert = spec.prepare(dist, n)?;
    let mut costs = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng: Stream = trial_stream(seed, t as u64);
        let clean = sampler.sample(n, &mut rng)?;
        let moved = pert.apply(&clean, &mut rng)?;
        costs.push(empirical_coupling_cost(&clean, &moved, eps * eps)?.mean);
    }
    let (mean, se) = mean_and_se(&costs);
    Ok(CouplingCost::from_moments(mean, se, eps * eps))
}
