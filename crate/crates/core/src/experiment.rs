//! Config-driven experiments: risk matrices, budget sweeps, verification against theory and
//! theory-only bound tables, rendered as CSV or JSON.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::perturbations::{Problem, ShiftClass};
use crate::risk::{self, LossSpec, SweepReport, SweepSetup};
use crate::rng::stream;
use crate::theory::{self, LrLoss, TheoryBound};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Monte Carlo comparisons pass within this many standard errors.
pub const SE_TOLERANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("format: expected csv or json, got {other:?}"))),
        }
    }
}

fn default_trials() -> usize {
    5000
}

fn default_classes() -> Vec<ShiftClass> {
    ShiftClass::ALL.to_vec()
}

fn default_loss() -> LossSpec {
    LossSpec::SquaredError
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Sample size. Taken from the design for regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_classes")]
    pub shift_classes: Vec<ShiftClass>,
    /// Budgets given as `eps = n^alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub output_format: OutputFormat,
    pub dist: DistributionSpec,
    #[serde(default = "default_loss")]
    pub loss: LossSpec,
}

/// `-2.5, -2.25, ..., 0.5`.
pub fn default_alphas() -> Vec<f64> {
    (0..13).map(|i| -2.5 + 0.25 * i as f64).collect()
}

/// `n x p` design with independent `N(0, 1/n)` entries.
pub fn gaussian_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed);
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, p, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    })
}

impl ExperimentConfig {
    fn base(problem: Problem, n: Option<usize>, dist: DistributionSpec, loss: LossSpec) -> Self {
        ExperimentConfig {
            problem,
            n,
            shift_classes: default_classes(),
            alphas: Some(default_alphas()),
            eps_list: None,
            trials: default_trials(),
            master_seed: 0,
            output_path: None,
            output_format: OutputFormat::Csv,
            dist,
            loss,
        }
    }

    /// `N(0, diag(1, 2, 3)/6)` with `n = 10`.
    pub fn location() -> Self {
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])) / 6.0;
        Self::base(Problem::Location, Some(10), DistributionSpec::gaussian(vec![0.0; 3], cov), LossSpec::SquaredError)
    }

    /// Gaussian design with `n = 10`, `p = 5`, `theta = 1` and noise `I/100`,
    /// or `diag(1, ..., 10)/200` when `heteroskedastic`.
    pub fn regression(heteroskedastic: bool, design_seed: u64) -> Self {
        let (n, p) = (10, 5);
        let noise_cov = if heteroskedastic {
            DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| (i + 1) as f64 / 200.0))
        } else {
            DMatrix::identity(n, n) / 100.0
        };
        let dist = DistributionSpec::LinearModel {
            design: gaussian_design(n, p, design_seed),
            theta: DVector::from_element(p, 1.0),
            noise_cov,
        };
        Self::base(Problem::LinearRegression, None, dist, LossSpec::PredictionError { design: None })
    }

    /// `U[theta - 1/2, theta + 1/2]` with `theta = 3` and `n = 50`.
    pub fn uniform() -> Self {
        Self::base(Problem::Uniform, Some(50), DistributionSpec::UniformLocation { theta: 3.0 }, LossSpec::SquaredError)
    }

    /// Bump pairs over `N(0, 1)` with the smallest admissible Hölder constant, centred bumps,
    /// `n = 1024` and budgets `n^alpha <= 1`.
    pub fn density(s: f64) -> Result<Self> {
        let big_l = crate::density::default_holder_constant(s, 1.0);
        let x0 = crate::density::centered_x0(s, big_l, 1.0)?;
        let dist = DistributionSpec::HolderBumpDensity { x0, s, big_l, sigma_base: 1.0, h: 1.0, sign: 0 };
        let mut cfg = Self::base(Problem::Density, Some(1024), dist, LossSpec::SquaredError);
        cfg.shift_classes = vec![ShiftClass::Ids];
        cfg.alphas = Some(default_alphas().into_iter().filter(|&a| a <= 0.0).collect());
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Sample size actually simulated.
    pub fn sample_size(&self) -> Result<usize> {
        match (&self.dist, self.n) {
            (DistributionSpec::LinearModel { design, .. }, _) => Ok(design.nrows()),
            (_, Some(n)) => Ok(n),
            (_, None) => Err(Error::Config("n: required for this problem".into())),
        }
    }

    /// `(alpha, eps)` pairs. For an explicit budget list, `alpha = ln eps / ln n`.
    pub fn grid(&self) -> Result<Vec<(f64, f64)>> {
        let nf = self.sample_size()? as f64;
        Ok(match (&self.alphas, &self.eps_list) {
            (Some(a), None) => a.iter().map(|&a| (a, nf.powf(a))).collect(),
            (None, Some(e)) => e.iter().map(|&e| (e.ln() / nf.ln(), e)).collect(),
            _ => return Err(Error::Config("alphas, eps_list: exactly one must be given".into())),
        })
    }

    pub fn setup(&self) -> Result<SweepSetup> {
        Ok(SweepSetup {
            problem: self.problem,
            dist: self.dist.clone(),
            n: self.sample_size()?,
            loss: self.loss.clone(),
            shift_classes: self.shift_classes.clone(),
        })
    }

    /// Checks every field, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.trials < 2 {
            return bad("trials", format!("must be at least 2, got {}", self.trials));
        }
        if self.shift_classes.is_empty() {
            return bad("shift_classes", "must name at least one class".into());
        }
        if self.shift_classes.iter().collect::<BTreeSet<_>>().len() != self.shift_classes.len() {
            return bad("shift_classes", "contains duplicates".into());
        }
        match (&self.alphas, &self.eps_list) {
            (Some(a), None) => {
                if let Some(x) = a.iter().find(|x| !x.is_finite()) {
                    return bad("alphas", format!("must be finite, got {x}"));
                }
            }
            (None, Some(e)) => {
                if let Some(x) = e.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return bad("eps_list", format!("must be finite and non-negative, got {x}"));
                }
            }
            (Some(_), Some(_)) => return bad("alphas, eps_list", "give only one of them".into()),
            (None, None) => return bad("alphas, eps_list", "one of them is required".into()),
        }
        if let Err(e) = self.dist.validate() {
            return bad("dist", e.to_string());
        }
        let fits = matches!(
            (self.problem, &self.dist),
            (Problem::Location, DistributionSpec::GaussianLocation { .. })
                | (Problem::LinearRegression, DistributionSpec::LinearModel { .. })
                | (Problem::Uniform, DistributionSpec::UniformLocation { .. })
                | (Problem::Density, DistributionSpec::HolderBumpDensity { .. })
        );
        if !fits {
            return bad("dist.kind", format!("does not fit problem {}", self.problem));
        }
        let loss_ok = match self.problem {
            Problem::LinearRegression => {
                matches!(self.loss, LossSpec::SquaredError | LossSpec::PredictionError { .. })
            }
            // the density loss is set by the bump pair
            Problem::Density => true,
            Problem::Location | Problem::Uniform => self.loss == LossSpec::SquaredError,
        };
        if !loss_ok {
            return bad("loss.kind", format!("not available for problem {}", self.problem));
        }
        match (&self.dist, self.n) {
            (DistributionSpec::LinearModel { design, .. }, Some(n)) if n != design.nrows() => {
                return bad("n", format!("{n} differs from the {} design rows", design.nrows()));
            }
            (DistributionSpec::LinearModel { .. }, _) => {}
            (_, None) => return bad("n", "required for this problem".into()),
            (_, Some(0)) => return bad("n", "must be positive".into()),
            (DistributionSpec::UniformLocation { .. }, Some(1)) => {
                return bad("n", "the uniform problem needs n >= 2".into());
            }
            _ => {}
        }
        if self.problem == Problem::Density {
            if let Some((_, e)) = self.grid()?.into_iter().find(|&(_, e)| e > 1.0) {
                return bad("alphas, eps_list", format!("density budgets must not exceed 1, got {e}"));
            }
        }
        Ok(())
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Missing, Value::Num)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl fmt::Display for Value {
    /// Floats use 17 significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) if x.is_finite() => write!(f, "{x:.16e}"),
            Value::Num(x) => write!(f, "{x}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Missing => Ok(()),
        }
    }
}

impl Value {
    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Num(x) => {
                serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, serde_json::Value::Number)
            }
            Value::Int(i) => (*i).into(),
            Value::Text(s) => s.clone().into(),
            Value::Bool(b) => (*b).into(),
            Value::Missing => serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        w.write_record(&self.columns).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Array of objects keyed by column name.
    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> =
                    self.columns.iter().cloned().zip(row.iter().map(Value::to_json)).collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows).map_err(|e| Error::Serialize(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Writes to `path`, or returns the text when `path` is `None`.
    pub fn write(&self, format: OutputFormat, path: Option<&Path>) -> Result<Option<String>> {
        let text = self.render(format)?;
        match path {
            Some(p) => {
                std::fs::write(p, text)?;
                Ok(None)
            }
            None => Ok(Some(text)),
        }
    }
}

/// Estimator-by-perturbation risks at the config's single budget, one row per cell.
pub fn cmd_risk_matrix(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let [(_, eps)] = grid[..] else {
        return Err(Error::Config(format!(
            "alphas, eps_list: risk-matrix needs exactly one budget, got {}",
            grid.len()
        )));
    };
    let setup = cfg.setup()?;
    let inst = risk::problem_instance(&setup, eps)?;
    let matrix = risk::with_threads(threads, || {
        risk::run_matrix(&inst.dist, &inst.estimators, &inst.catalog, setup.n, &inst.loss, cfg.trials, cfg.master_seed)
    })??;
    let mut table = Table::new(&["estimator", "perturbation", "mean", "std_error", "trials", "seed"]);
    for (i, est) in matrix.estimators.iter().enumerate() {
        for (j, pert) in matrix.perturbations.iter().enumerate() {
            let c = matrix.cells[i][j];
            table.push(vec![
                est.as_str().into(),
                pert.as_str().into(),
                c.mean.into(),
                c.std_error.into(),
                Value::Int(c.trials as u64),
                Value::Int(c.seed),
            ]);
        }
    }
    Ok(table)
}

pub fn run_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepReport> {
    cfg.validate()?;
    let setup = cfg.setup()?;
    let grid = cfg.grid()?;
    risk::with_threads(threads, || risk::sweep_eps(&setup, &grid, cfg.trials, cfg.master_seed))?
}

pub fn sweep_table(report: &SweepReport) -> Table {
    let mut table = Table::new(&[
        "alpha",
        "eps",
        "shift_class",
        "minimax_estimator",
        "minimax_empirical",
        "se",
        "log_n_risk",
        "theory_exact",
        "theory_lower",
        "theory_upper",
    ]);
    for r in &report.rows {
        table.push(vec![
            r.alpha.into(),
            r.eps.into(),
            r.shift_class.as_str().into(),
            r.minimax_estimator.as_str().into(),
            r.minimax_empirical.into(),
            r.std_error.into(),
            r.log_n_risk.into(),
            r.theory_exact.into(),
            r.theory_lower.into(),
            r.theory_upper.into(),
        ]);
    }
    table
}

/// Empirical minimax per budget and shift class next to the theory values.
pub fn cmd_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    Ok(sweep_table(&run_sweep(cfg, threads)?))
}

/// Theory values per budget, with `<CLASS>_exact`, `<CLASS>_lower` and `<CLASS>_upper`
/// columns for every configured class. No sampling.
pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let setup = cfg.setup()?;
    let mut cols = vec!["alpha".to_string(), "eps".to_string()];
    for c in &cfg.shift_classes {
        for kind in ["exact", "lower", "upper"] {
            cols.push(format!("{c}_{kind}"));
        }
    }
    cols.push("rate_only".into());
    let mut table = Table { columns: cols, rows: Vec::new() };
    for (alpha, eps) in cfg.grid()? {
        let mut row = vec![alpha.into(), eps.into()];
        let mut rate_only = false;
        for &c in &cfg.shift_classes {
            let b = risk::theory_for(&setup, c, eps)?;
            rate_only |= b.rate_only;
            row.extend([b.exact.into(), b.lower.into(), b.upper.into()]);
        }
        row.push(Value::Bool(rate_only));
        table.push(row);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Slack allowed on each side.
    pub tolerance: f64,
}

impl Check {
    fn within(name: String, value: f64, lower: Option<f64>, upper: Option<f64>, tolerance: f64) -> Self {
        let passed = value.is_finite()
            && lower.is_none_or(|l| value >= l - tolerance)
            && upper.is_none_or(|u| value <= u + tolerance);
        Check { name, passed, value, lower, upper, tolerance }
    }

    fn close(name: String, value: f64, target: f64, rel: f64) -> Self {
        Self::within(name, value, Some(target), Some(target), rel * target.abs().max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["check", "passed", "value", "lower", "upper", "tolerance"]);
        for c in &self.checks {
            t.push(vec![
                c.name.as_str().into(),
                Value::Bool(c.passed),
                c.value.into(),
                c.lower.into(),
                c.upper.into(),
                c.tolerance.into(),
            ]);
        }
        t
    }
}

pub type TheoryFn<'a> = dyn Fn(&SweepSetup, ShiftClass, f64) -> Result<TheoryBound> + 'a;

/// Simulation-vs-theory checks for the config plus the closed-form identity suite.
pub fn cmd_verify(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<VerifyReport> {
    verify_with(cfg, threads, &risk::theory_for)
}

/// [`cmd_verify`] with the theory values supplied by `theory`.
///
/// An empirical minimax over a finite catalog can sit below the true minimax, so lower bounds
/// are only checked for rows whose columns include a perturbation of the row's own class.
pub fn verify_with(cfg: &ExperimentConfig, threads: Option<usize>, theory: &TheoryFn<'_>) -> Result<VerifyReport> {
    let report = run_sweep(cfg, threads)?;
    let setup = cfg.setup()?;
    let mut checks = Vec::new();
    for row in &report.rows {
        let bound = theory(&setup, row.shift_class, row.eps)?;
        let prefix = format!("sweep/{}/{}/eps={:.6e}", cfg.problem, row.shift_class, row.eps);
        if bound.rate_only {
            continue;
        }
        let inst = risk::problem_instance(&setup, row.eps)?;
        let own_class = inst.catalog.iter().any(|p| p.class() == row.shift_class);
        let tol = SE_TOLERANCE * row.std_error + 1e-12 * row.minimax_empirical.abs().max(1e-300);
        let (lower, upper) = match bound.exact {
            Some(x) if own_class => (Some(x), Some(x)),
            Some(x) => (None, Some(x)),
            None => (bound.lower.filter(|_| own_class), bound.upper),
        };
        if lower.is_some() || upper.is_some() {
            checks.push(Check::within(prefix, row.minimax_empirical, lower, upper, tol));
        }
    }
    if cfg.problem == Problem::Density {
        for (_, eps) in cfg.grid()? {
            if eps > 0.0 {
                let pair = crate::density::pair_from_spec(&cfg.dist, eps)?;
                checks.push(Check::within(
                    format!("density/certified_budget/eps={eps:.6e}"),
                    pair.eps_certified,
                    None,
                    Some(eps),
                    0.0,
                ));
            }
        }
    }
    checks.extend(identity_checks(cfg)?);
    Ok(VerifyReport { checks })
}

/// Exact relations between the closed forms: continuity at regime changes, class ordering
/// and Bayes limits.
pub fn identity_checks(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let (n, cov) = match &cfg.dist {
        DistributionSpec::GaussianLocation { sigma_cov, .. } => (cfg.sample_size()?, sigma_cov.clone()),
        _ => (10, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])) / 6.0),
    };
    let trace = cov.trace();
    let mut out = Vec::new();

    if n > 1 {
        let t = trace.sqrt() / (n as f64 - 1.0);
        let nf = n as f64;
        let below = (t + trace.sqrt()).powi(2) / nf;
        let above = t * t + trace / (nf - 1.0);
        out.push(Check::close("formula/location_ids_continuity".into(), below, above, 1e-12));
    }

    let mut ordered = true;
    let mut worst = 0.0f64;
    for k in 0..50 {
        let eps = 2.0 * k as f64 / 49.0;
        let c = theory::location_risk(ShiftClass::Cds, eps, n, trace)?;
        let i = theory::location_risk(ShiftClass::Ids, eps, n, trace)?;
        let j = theory::location_risk(ShiftClass::Jds, eps, n, trace)?;
        let slack = 1e-12 * j;
        ordered &= c <= i + slack && i <= j + slack;
        worst = worst.max(c - i).max(i - j);
    }
    out.push(Check {
        name: "formula/location_class_order".into(),
        passed: ordered,
        value: worst,
        lower: None,
        upper: Some(0.0),
        tolerance: 1e-12,
    });

    for eps in [0.1, 0.5] {
        let mj = theory::location_risk(ShiftClass::Jds, eps, n, trace)?;
        let limit = theory::bayes_posterior_location(eps, n, &cov, f64::INFINITY, ShiftClass::Jds)?;
        out.push(Check::close(format!("formula/bayes_jds_limit/eps={eps}"), limit, mj, 1e-12));
        let finite = theory::bayes_posterior_location(eps, n, &cov, 1e6, ShiftClass::Jds)?;
        out.push(Check::close(format!("formula/bayes_jds_finite_b/eps={eps}"), finite, limit, 1e-5));
    }

    let (design, noise_cov) = match &cfg.dist {
        DistributionSpec::LinearModel { design, noise_cov, .. } => (design.clone(), noise_cov.clone()),
        _ => match ExperimentConfig::regression(false, 0).dist {
            DistributionSpec::LinearModel { design, noise_cov, .. } => (design, noise_cov),
            _ => unreachable!("regression preset holds a linear model"),
        },
    };
    for eps in [0.05, 0.2] {
        let bayes = theory::lr_bayes(eps, &design, &noise_cov, f64::INFINITY, LrLoss::Prediction)?;
        let exact = theory::lr_prediction_risk(eps, &design, &noise_cov)?;
        out.push(Check::close(format!("formula/lr_bayes_limit/eps={eps}"), bayes, exact, 1e-12));
    }

    let un = match cfg.problem {
        Problem::Uniform => cfg.sample_size()?,
        _ => 50,
    };
    let cu = theory::uniform_switch_threshold(un)?;
    let nf = un as f64;
    let left = (cu * nf.sqrt() + theory::uniform_clean_risk(un).sqrt()).powi(2);
    let right = (cu + 1.0 / (12.0 * nf).sqrt()).powi(2);
    out.push(Check::close("formula/uniform_jds_continuity".into(), left, right, 1e-12));
    let mut sandwich = true;
    let mut gap = f64::NEG_INFINITY;
    for k in 0..50 {
        let eps = nf.powf(-3.0 + 3.5 * k as f64 / 49.0);
        let lo = theory::uniform_ids_lower(eps, un)?;
        let hi = theory::uniform_jds_upper(eps, un)?;
        sandwich &= lo <= hi;
        gap = gap.max(lo - hi);
    }
    out.push(Check {
        name: "formula/uniform_lower_below_upper".into(),
        passed: sandwich,
        value: gap,
        lower: None,
        upper: Some(0.0),
        tolerance: 0.0,
    });
    Ok(out)
}
