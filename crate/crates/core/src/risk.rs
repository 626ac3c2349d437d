//! Monte Carlo risk engine: risk cells, estimator-by-perturbation matrices, the empirical
//! minimax summary and epsilon sweeps against theory.
//!
//! Each cell `(i, j)` draws from its own seed `cell_seed(master, i, j)` and each trial from
//! its own stream, so the output is identical for any thread count.

use crate::distributions::{DistributionSpec, Sampler};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, NamedEstimator};
use crate::perturbations::{CatalogEntry, Perturbation, Problem, ShiftClass};
use crate::rng::{cell_seed, mix, trial_stream};
use crate::theory::TheoryBound;
use crate::transport::mean_and_se;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `‖θ̂ - θ‖²`.
    SquaredError,
    /// `‖X(θ̂ - θ)‖² / n`. The design defaults to that of the linear model being simulated.
    PredictionError {
        #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
        design: Option<DMatrix<f64>>,
    },
    /// `(f̂(x0) - true_value)²`.
    PointwiseSquared { x0: f64, true_value: f64 },
}

mod opt_matrix {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::serde_mat::matrix")] DMatrix<f64>);

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(|m| Wrap(m.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone)]
enum Loss {
    Squared,
    Prediction(DMatrix<f64>),
    Pointwise(f64),
}

impl LossSpec {
    fn bind(&self, dist: &DistributionSpec) -> Result<Loss> {
        Ok(match self {
            LossSpec::SquaredError => Loss::Squared,
            LossSpec::PredictionError { design } => {
                let model = match dist {
                    DistributionSpec::LinearModel { design, .. } => Some(design),
                    _ => None,
                };
                let d = match (design, model) {
                    (Some(d), Some(m)) if d != m => {
                        return Err(Error::Config("prediction loss design differs from the model design".into()))
                    }
                    (Some(d), _) => d.clone(),
                    (None, Some(m)) => m.clone(),
                    (None, None) => return Err(Error::Config("prediction loss needs a design".into())),
                };
                Loss::Prediction(d)
            }
            LossSpec::PointwiseSquared { true_value, .. } => Loss::Pointwise(*true_value),
        })
    }
}

impl Loss {
    fn eval(&self, est: &DVector<f64>, target: &DVector<f64>) -> Result<f64> {
        match self {
            Loss::Squared => {
                if est.len() != target.len() {
                    return Err(Error::dim(format!("estimate has length {}, target {}", est.len(), target.len())));
                }
                Ok((est - target).norm_squared())
            }
            Loss::Prediction(x) => {
                if est.len() != x.ncols() || target.len() != x.ncols() {
                    return Err(Error::dim("estimate length differs from design columns"));
                }
                Ok((x * (est - target)).norm_squared() / x.nrows() as f64)
            }
            Loss::Pointwise(v) => Ok((est[0] - v).powi(2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCell {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

struct Bound<'a> {
    sampler: &'a Sampler,
    estimator: &'a Estimator,
    perturbation: &'a Perturbation,
    loss: &'a Loss,
    target: &'a DVector<f64>,
    n: usize,
}

fn run_trials(b: &Bound<'_>, trials: usize, seed: u64) -> Result<RiskCell> {
    let losses: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_stream(seed, t as u64);
            let clean = b.sampler.sample(b.n, &mut rng)?;
            let shifted = b.perturbation.apply(&clean, &mut rng)?;
            let est = b.estimator.estimate(&shifted)?;
            b.loss.eval(&est, b.target)
        })
        .collect::<Result<Vec<f64>>>()?;
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("non-finite loss in a trial".into()));
    }
    let (mean, std_error) = mean_and_se(&losses);
    Ok(RiskCell { mean, std_error, trials, seed })
}

/// Risk of one estimator under one perturbation; `seed` is the cell seed.
pub fn run_cell(
    dist: &DistributionSpec,
    estimator: &crate::estimators::EstimatorSpec,
    perturbation: &crate::perturbations::PerturbationSpec,
    n: usize,
    loss: &LossSpec,
    trials: usize,
    seed: u64,
) -> Result<RiskCell> {
    if trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let sampler = dist.sampler()?;
    let est = estimator.prepare()?;
    let pert = perturbation.prepare(dist, n)?;
    let loss = loss.bind(dist)?;
    let target = loss_target(dist, &loss);
    run_trials(
        &Bound { sampler: &sampler, estimator: &est, perturbation: &pert, loss: &loss, target: &target, n },
        trials,
        seed,
    )
}

fn loss_target(dist: &DistributionSpec, loss: &Loss) -> DVector<f64> {
    match loss {
        Loss::Pointwise(v) => DVector::from_element(1, *v),
        _ => dist.target(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMatrix {
    pub estimators: Vec<String>,
    pub perturbations: Vec<String>,
    /// `cells[i][j]`: estimator `i` under perturbation `j`.
    pub cells: Vec<Vec<RiskCell>>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSummary {
    pub estimator: String,
    pub worst_perturbation: String,
    pub value: f64,
    pub std_error: f64,
}

impl RiskMatrix {
    /// Largest risk of estimator `i` and the column where it occurs (lowest index on ties).
    pub fn worst_case(&self, i: usize) -> (usize, RiskCell) {
        let row = &self.cells[i];
        let mut best = 0;
        for (j, c) in row.iter().enumerate() {
            if c.mean > row[best].mean {
                best = j;
            }
        }
        (best, row[best])
    }

    /// Restricts to the columns whose index passes `keep`.
    pub fn select_columns(&self, keep: impl Fn(usize) -> bool) -> RiskMatrix {
        let cols: Vec<usize> = (0..self.perturbations.len()).filter(|&j| keep(j)).collect();
        RiskMatrix {
            estimators: self.estimators.clone(),
            perturbations: cols.iter().map(|&j| self.perturbations[j].clone()).collect(),
            cells: self.cells.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect(),
            master_seed: self.master_seed,
        }
    }
}

/// `min_i max_j` of the matrix, ties broken by the lowest index.
pub fn minimax(m: &RiskMatrix) -> Result<MinimaxSummary> {
    if m.estimators.is_empty() || m.perturbations.is_empty() {
        return Err(Error::param("minimax of an empty risk matrix"));
    }
    let mut best: Option<(usize, usize, RiskCell)> = None;
    for i in 0..m.estimators.len() {
        let (j, c) = m.worst_case(i);
        if best.is_none_or(|(_, _, b)| c.mean < b.mean) {
            best = Some((i, j, c));
        }
    }
    let (i, j, c) = best.expect("non-empty");
    Ok(MinimaxSummary {
        estimator: m.estimators[i].clone(),
        worst_perturbation: m.perturbations[j].clone(),
        value: c.mean,
        std_error: c.std_error,
    })
}

/// Runs `threads` workers, or the global rayon pool when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_matrix(
    dist: &DistributionSpec,
    estimators: &[NamedEstimator],
    perturbations: &[CatalogEntry],
    n: usize,
    loss: &LossSpec,
    trials: usize,
    master_seed: u64,
) -> Result<RiskMatrix> {
    if trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let sampler = dist.sampler()?;
    let loss = loss.bind(dist)?;
    let target = loss_target(dist, &loss);
    let ests: Vec<Estimator> = estimators.iter().map(|e| e.spec.prepare()).collect::<Result<_>>()?;
    let perts: Vec<Perturbation> = perturbations.iter().map(|p| p.spec.prepare(dist, n)).collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(ests.len());
    for (i, est) in ests.iter().enumerate() {
        let row = perts
            .iter()
            .enumerate()
            .map(|(j, pert)| {
                let b =
                    Bound { sampler: &sampler, estimator: est, perturbation: pert, loss: &loss, target: &target, n };
                run_trials(&b, trials, cell_seed(master_seed, i, j))
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(row);
    }
    Ok(RiskMatrix {
        estimators: estimators.iter().map(|e| e.label.clone()).collect(),
        perturbations: perturbations.iter().map(|p| p.label.clone()).collect(),
        cells,
        master_seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub eps: f64,
    pub shift_class: ShiftClass,
    pub minimax_estimator: String,
    pub minimax_empirical: f64,
    pub std_error: f64,
    /// `log(risk) / log(n)`.
    pub log_n_risk: f64,
    pub theory_exact: Option<f64>,
    pub theory_lower: Option<f64>,
    pub theory_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub problem: Problem,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

/// Everything a sweep needs besides the budget grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub problem: Problem,
    pub dist: DistributionSpec,
    pub n: usize,
    pub loss: LossSpec,
    pub shift_classes: Vec<ShiftClass>,
}

/// Sample size used by the problem (the design rows for regression).
pub fn effective_n(problem: Problem, dist: &DistributionSpec, n: usize) -> usize {
    match (problem, dist) {
        (Problem::LinearRegression, DistributionSpec::LinearModel { design, .. }) => design.nrows(),
        _ => n,
    }
}

/// Empirical minimax per shift class over the catalog at each `eps = n^alpha`, next to theory.
/// A class is evaluated over every catalog perturbation belonging to it or to a smaller class.
pub fn epsilon_sweep(setup: &SweepSetup, alphas: &[f64], trials: usize, master_seed: u64) -> Result<SweepReport> {
    let n = effective_n(setup.problem, &setup.dist, setup.n);
    let eps_grid: Vec<(f64, f64)> = alphas.iter().map(|&a| (a, (n as f64).powf(a))).collect();
    sweep_eps(setup, &eps_grid, trials, master_seed)
}

/// Same as [`epsilon_sweep`] with explicit `(alpha, eps)` pairs.
pub fn sweep_eps(setup: &SweepSetup, grid: &[(f64, f64)], trials: usize, master_seed: u64) -> Result<SweepReport> {
    let n = effective_n(setup.problem, &setup.dist, setup.n);
    let mut rows = Vec::new();
    for (a_idx, &(alpha, eps)) in grid.iter().enumerate() {
        let inst = problem_instance(setup, eps)?;
        let catalog = &inst.catalog;
        let seed = mix(&[master_seed, a_idx as u64]);
        let matrix = run_matrix(&inst.dist, &inst.estimators, catalog, n, &inst.loss, trials, seed)?;
        for &class in &setup.shift_classes {
            let sub = matrix.select_columns(|j| catalog[j].class() <= class);
            if sub.perturbations.is_empty() {
                continue;
            }
            let mm = minimax(&sub)?;
            let theory = theory_for(setup, class, eps)?;
            rows.push(SweepRow {
                alpha,
                eps,
                shift_class: class,
                minimax_estimator: mm.estimator,
                minimax_empirical: mm.value,
                std_error: mm.std_error,
                log_n_risk: mm.value.ln() / (n as f64).ln(),
                theory_exact: theory.exact,
                theory_lower: theory.lower,
                theory_upper: theory.upper,
            });
        }
    }
    Ok(SweepReport { problem: setup.problem, n, trials, master_seed, rows })
}

/// What gets simulated for a problem at one budget.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub dist: DistributionSpec,
    pub loss: LossSpec,
    pub estimators: Vec<NamedEstimator>,
    pub catalog: Vec<CatalogEntry>,
}

/// Law, loss, estimators and perturbation catalog for a problem at budget `eps`.
/// For the density problem the sampled law itself is the shifted member of a bump pair.
pub fn problem_instance(setup: &SweepSetup, eps: f64) -> Result<ProblemInstance> {
    let n = effective_n(setup.problem, &setup.dist, setup.n);
    if setup.problem == Problem::Density {
        let pair = crate::density::pair_from_spec(&setup.dist, eps)?;
        let estimators = crate::density::kde_catalog(&pair.clean, n, eps)?;
        let catalog = crate::perturbations::catalog(Problem::Density, eps, &pair.shifted, n)?;
        return Ok(ProblemInstance { loss: pair.loss(), dist: pair.shifted, estimators, catalog });
    }
    let catalog = crate::perturbations::catalog(setup.problem, eps, &setup.dist, n)?;
    let estimators = crate::estimators::estimator_catalog(setup.problem, &setup.dist, n)?;
    Ok(ProblemInstance { dist: setup.dist.clone(), loss: setup.loss.clone(), estimators, catalog })
}

/// Theory values matching a problem setup.
pub fn theory_for(setup: &SweepSetup, class: ShiftClass, eps: f64) -> Result<TheoryBound> {
    use crate::theory;
    let n = effective_n(setup.problem, &setup.dist, setup.n);
    match (setup.problem, &setup.dist) {
        (Problem::Location, DistributionSpec::GaussianLocation { sigma_cov, .. }) => {
            theory::location_bound(class, eps, n, sigma_cov)
        }
        (Problem::LinearRegression, DistributionSpec::LinearModel { design, noise_cov, .. }) => {
            let loss = match setup.loss {
                LossSpec::PredictionError { .. } => theory::LrLoss::Prediction,
                _ => theory::LrLoss::Squared,
            };
            let mut b = theory::lr_bound(loss, eps, design, noise_cov)?;
            if class != ShiftClass::Jds {
                // the joint-shift risk only bounds the smaller classes from above
                b.lower = None;
                b.upper = b.exact.or(b.upper);
                b.exact = None;
            }
            b.shift_class = class;
            Ok(b)
        }
        (Problem::Uniform, _) => theory::uniform_bounds(class, eps, n),
        (Problem::Density, DistributionSpec::HolderBumpDensity { s, .. }) => {
            let mut b = theory::density_bounds(eps, n, *s)?;
            b.shift_class = class;
            Ok(b)
        }
        _ => Err(Error::Config(format!("distribution does not fit problem {}", setup.problem))),
    }
}
