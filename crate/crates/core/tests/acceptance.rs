//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process fails if any does.
//! Reference values are recomputed here from closed forms, independently of the library.

use nalgebra::{DMatrix, DVector};
use shiftrisk::density::{self, build_pair, loglog_slope};
use shiftrisk::estimators::EstimatorSpec;
use shiftrisk::experiment::{cmd_sweep, ExperimentConfig};
use shiftrisk::perturbations::{self, budget_check, catalog, PerturbationSpec, Problem, Projector, ShiftClass};
use shiftrisk::risk::{problem_instance, run_cell, run_matrix, sweep_eps, LossSpec};
use shiftrisk::theory::{self, LowerBoundTool, Phi};
use shiftrisk::transport::{w2_1d, w2_gaussian, SMOOTHED_UNIFORM_W2_CONST};
use shiftrisk::{DistributionSpec, FisherMode};
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

const K_SE: f64 = 3.0;
const BIG_TRIALS: usize = 100_000;
const TRIALS: usize = 5000;
const IDENTITY_TOL: f64 = 1e-12;
const CLOSED_FORM_TOL: f64 = 1e-6;
const FINITE_B_TOL: f64 = 1e-5;
const SLOPE_TOL: f64 = 0.1;
const KDE_TRIALS: usize = 4000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(value: f64, target: f64, se: f64, what: &str) -> Result<String, String> {
    let msg = format!("{what}: {value:.6e} vs {target:.6e} (3SE {:.2e})", K_SE * se);
    if (value - target).abs() <= K_SE * se + 1e-15 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let failed: Vec<String> = parts.iter().filter_map(|p| p.clone().err()).collect();
    if failed.is_empty() {
        Ok(format!("{} checks", parts.len()))
    } else {
        Err(failed.join("; "))
    }
}

fn location_cov() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])) / 6.0
}

fn location_dist() -> DistributionSpec {
    DistributionSpec::gaussian(vec![0.0; 3], location_cov())
}

fn model(cfg: &ExperimentConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    match &cfg.dist {
        DistributionSpec::LinearModel { design, noise_cov, .. } => (design.clone(), noise_cov.clone()),
        _ => unreachable!(),
    }
}

fn c1() -> Outcome {
    let n = 10;
    let parts = [0.0, 0.1, 0.5, 1.0]
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            // trΣ = 1, so ξ = eps √n
            let pert = PerturbationSpec::JdsMeanShift { xi: eps * (n as f64).sqrt() };
            let cell = run_cell(
                &location_dist(),
                &EstimatorSpec::SampleMean,
                &pert,
                n,
                &LossSpec::SquaredError,
                BIG_TRIALS,
                100 + i as u64,
            )
            .map_err(|e| e.to_string())?;
            within(cell.mean, (eps + 0.1f64.sqrt()).powi(2), cell.std_error, &format!("eps={eps}"))
        })
        .collect();
    all(parts)
}

fn m_i(eps: f64, n: f64, t: f64) -> f64 {
    if eps * eps <= t / ((n - 1.0) * (n - 1.0)) {
        (eps + t.sqrt()).powi(2) / n
    } else {
        eps * eps + t / (n - 1.0)
    }
}

fn c2() -> Outcome {
    let n = 10;
    let mut parts: Vec<Outcome> = [0.05, 1.0 / 9.0, 0.2]
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let pert = perturbations::least_favorable_location(ShiftClass::Ids, eps, n, &location_cov())
                .map_err(|e| e.to_string())?;
            let cell = run_cell(
                &location_dist(),
                &EstimatorSpec::SampleMean,
                &pert,
                n,
                &LossSpec::SquaredError,
                BIG_TRIALS,
                200 + i as u64,
            )
            .map_err(|e| e.to_string())?;
            within(cell.mean, m_i(eps, 10.0, 1.0), cell.std_error, &format!("eps={eps:.4}"))
        })
        .collect();
    let t = 1.0 / 9.0;
    let below = (t + 1.0f64).powi(2) / 10.0;
    let above = t * t + 1.0 / 9.0;
    parts.push(if (below - above).abs() <= IDENTITY_TOL * above {
        Ok("branches agree".into())
    } else {
        Err(format!("branches differ at transition: {below} vs {above}"))
    });
    all(parts)
}

fn c3() -> Outcome {
    let cfg = ExperimentConfig::regression(false, 7);
    let (design, noise_cov) = model(&cfg);
    let loss = LossSpec::PredictionError { design: None };
    let est = EstimatorSpec::LeastSquares { design: design.clone() };
    let parts = [0.0, 0.05, 0.2]
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let kappa = perturbations::lr_kappa(eps, &design, &noise_cov, Projector::Ols).map_err(|e| e.to_string())?;
            let pert = PerturbationSpec::LrPredictionShift { kappa, projector: Projector::Ols };
            let cell =
                run_cell(&cfg.dist, &est, &pert, 10, &loss, BIG_TRIALS, 300 + i as u64).map_err(|e| e.to_string())?;
            within(cell.mean, (eps + 0.1 * 0.5f64.sqrt()).powi(2), cell.std_error, &format!("eps={eps}"))
        })
        .collect();
    all(parts)
}

fn c4() -> Outcome {
    let cfg = ExperimentConfig::regression(true, 7);
    let (design, noise_cov) = model(&cfg);
    let n = design.nrows() as f64;
    // Tr[Σ P_{X,Σ}] = Tr[X (XᵀΣ⁻¹X)⁻¹ Xᵀ]
    let w = noise_cov.clone().try_inverse().unwrap();
    let gram = (design.transpose() * &w * &design).try_inverse().unwrap();
    let tr = (&design * gram * design.transpose()).trace();
    let loss = LossSpec::PredictionError { design: None };
    let gls = EstimatorSpec::GeneralizedLeastSquares { design: design.clone(), noise_cov: noise_cov.clone() };
    let mut parts: Vec<Outcome> = [0.0, 0.05, 0.2]
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let kappa = perturbations::lr_kappa(eps, &design, &noise_cov, Projector::Gls).map_err(|e| e.to_string())?;
            let pert = PerturbationSpec::LrPredictionShift { kappa, projector: Projector::Gls };
            let cell =
                run_cell(&cfg.dist, &gls, &pert, 10, &loss, BIG_TRIALS, 400 + i as u64).map_err(|e| e.to_string())?;
            within(cell.mean, (eps + (tr / n).sqrt()).powi(2), cell.std_error, &format!("gls eps={eps}"))
        })
        .collect();
    let setup = cfg.setup().unwrap();
    for (k, eps) in [0.05, 0.2].into_iter().enumerate() {
        let inst = problem_instance(&setup, eps).map_err(|e| e.to_string())?;
        let m = run_matrix(&inst.dist, &inst.estimators, &inst.catalog, 10, &inst.loss, TRIALS, 450 + k as u64)
            .map_err(|e| e.to_string())?;
        let ls = m.estimators.iter().position(|e| e == "least_squares").unwrap();
        let gl = m.estimators.iter().position(|e| e == "generalized_least_squares").unwrap();
        let (_, a) = m.worst_case(ls);
        let (_, b) = m.worst_case(gl);
        let slack = K_SE * a.std_error.hypot(b.std_error);
        let msg = format!("worst-case eps={eps}: gls {:.5e} vs ls {:.5e} (slack {slack:.2e})", b.mean, a.mean);
        parts.push(if b.mean <= a.mean + slack { Ok(msg) } else { Err(msg) });
    }
    all(parts)
}

fn c5() -> Outcome {
    let dist = DistributionSpec::UniformLocation { theta: 3.0 };
    let parts = [0.0, 0.01, 0.1]
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let pert = PerturbationSpec::ConstantShift { delta: DVector::from_element(1, eps) };
            let cell = run_cell(
                &dist,
                &EstimatorSpec::Midrange { k: 1 },
                &pert,
                50,
                &LossSpec::SquaredError,
                BIG_TRIALS,
                500 + i as u64,
            )
            .map_err(|e| e.to_string())?;
            within(cell.mean, eps * eps + 1.0 / 5304.0, cell.std_error, &format!("eps={eps}"))
        })
        .collect();
    all(parts)
}

fn uniform_ids_lower(eps: f64, n: f64) -> f64 {
    let clean = 1.0 / (2.0 * (n + 1.0) * (n + 2.0));
    (0.614 * eps.powf(2.0 / 3.0) / n).min(1.0 / (2.0 * PI * n)).max(eps * eps + clean)
}

fn uniform_jds_upper(eps: f64, n: f64) -> f64 {
    let clean = 1.0 / (2.0 * (n + 1.0) * (n + 2.0));
    let cu = ((3.0 / n).sqrt() - (18.0 / ((n + 2.0) * (n + 1.0))).sqrt()) / (6.0 * (n.sqrt() - 1.0));
    if eps <= cu {
        (eps * n.sqrt() + clean.sqrt()).powi(2)
    } else {
        (eps + 1.0 / (12.0 * n).sqrt()).powi(2)
    }
}

fn c6() -> Outcome {
    let cfg = ExperimentConfig::uniform();
    let mut setup = cfg.setup().unwrap();
    setup.shift_classes = vec![ShiftClass::Jds];
    let grid: Vec<(f64, f64)> = [-2.5, -2.0, -1.5, -1.0, -0.5, 0.0].iter().map(|&a| (a, 50f64.powf(a))).collect();
    let report = sweep_eps(&setup, &grid, TRIALS, 600).map_err(|e| e.to_string())?;
    let parts = report
        .rows
        .iter()
        .map(|r| {
            let lo = uniform_ids_lower(r.eps, 50.0);
            let hi = uniform_jds_upper(r.eps, 50.0);
            let tol = K_SE * r.std_error;
            let msg = format!("alpha={}: {lo:.4e} <= {:.4e} <= {hi:.4e}", r.alpha, r.minimax_empirical);
            if lo - tol <= r.minimax_empirical && r.minimax_empirical <= hi + tol {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
        .collect();
    all(parts)
}

fn rel_close(a: f64, b: f64, tol: f64, what: &str) -> Outcome {
    let msg = format!("{what}: {a:.10e} vs {b:.10e}");
    if (a - b).abs() <= tol * b.abs() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7() -> Outcome {
    let c = 2.0 * (6.0 - 6.0 * 2f64.sqrt() + PI) / (3.0 * PI);
    let mut parts = vec![rel_close(SMOOTHED_UNIFORM_W2_CONST, c, 1e-15, "constant")];
    for tau in [0.05, 0.1, 0.25, 0.5] {
        let su = DistributionSpec::SmoothedUniform { theta: 0.0, tau };
        let fisher = su.fisher_info(FisherMode::Numeric).map_err(|e| e.to_string())?;
        parts.push(rel_close(fisher, PI / tau, CLOSED_FORM_TOL, &format!("fisher tau={tau}")));
        let w2 = w2_1d(&DistributionSpec::UniformLocation { theta: 0.0 }, &su, 1e-10).map_err(|e| e.to_string())?;
        parts.push(rel_close(w2, (c * tau.powi(3)).sqrt(), CLOSED_FORM_TOL, &format!("w2 tau={tau}")));
    }
    let k = 1.0 / (PI * c.powf(1.0 / 3.0));
    parts.push(if k >= 0.614 { Ok(format!("1/(pi c^(1/3)) = {k:.5}")) } else { Err(format!("constant {k} < 0.614")) });
    all(parts)
}

fn c8() -> Outcome {
    let mut parts = Vec::new();
    for dm in [0.0, 0.1, 0.5, 1.0, 3.0] {
        for ratio in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let p = DistributionSpec::gaussian_1d(0.0, 1.0);
            let q = DistributionSpec::gaussian_1d(dm, ratio);
            let numeric = w2_1d(&p, &q, 1e-10).map_err(|e| e.to_string())?;
            let closed = (dm * dm + (1.0 - ratio) * (1.0 - ratio)).sqrt();
            if closed == 0.0 {
                parts.push(if numeric < 1e-8 {
                    Ok("zero".into())
                } else {
                    Err(format!("identical laws give {numeric}"))
                });
                continue;
            }
            let lib = w2_gaussian(
                &DVector::from_element(1, 0.0),
                &DMatrix::from_element(1, 1, 1.0),
                &DVector::from_element(1, dm),
                &DMatrix::from_element(1, 1, ratio * ratio),
            )
            .map_err(|e| e.to_string())?;
            parts.push(rel_close(numeric, closed, CLOSED_FORM_TOL, &format!("dm={dm} ratio={ratio}")));
            parts.push(rel_close(lib, closed, 1e-12, &format!("bures dm={dm} ratio={ratio}")));
        }
    }
    all(parts)
}

fn c9() -> Outcome {
    let cov = location_cov();
    let mut parts = Vec::new();
    for eps in [0.05, 0.2, 1.0] {
        let mj = (eps + 0.1f64.sqrt()).powi(2);
        let limit = theory::bayes_posterior_location(eps, 10, &cov, f64::INFINITY, ShiftClass::Jds)
            .map_err(|e| e.to_string())?;
        parts.push(rel_close(limit, mj, IDENTITY_TOL, &format!("jds limit eps={eps}")));
        let finite =
            theory::bayes_posterior_location(eps, 10, &cov, 1e6, ShiftClass::Jds).map_err(|e| e.to_string())?;
        parts.push(rel_close(finite, limit, FINITE_B_TOL, &format!("b=1e6 eps={eps}")));
    }
    for hetero in [false, true] {
        let (design, noise_cov) = model(&ExperimentConfig::regression(hetero, 7));
        let w = noise_cov.clone().try_inverse().unwrap();
        let gram = (design.transpose() * &w * &design).try_inverse().unwrap();
        let tr = (&design * gram * design.transpose()).trace();
        for eps in [0.05, 0.2] {
            let lrp = (eps + (tr / 10.0).sqrt()).powi(2);
            let b = theory::lr_bayes(eps, &design, &noise_cov, f64::INFINITY, theory::LrLoss::Prediction)
                .map_err(|e| e.to_string())?;
            parts.push(rel_close(b, lrp, IDENTITY_TOL, &format!("lr limit eps={eps} hetero={hetero}")));
        }
    }
    all(parts)
}

fn c10() -> Outcome {
    let mut parts = Vec::new();
    let mut ordered = true;
    for k in 0..50 {
        let eps = 2.0 * k as f64 / 49.0;
        let c = eps * eps + 0.1;
        let i = m_i(eps, 10.0, 1.0);
        let j = (eps + 0.1f64.sqrt()).powi(2);
        let lib: Vec<f64> =
            ShiftClass::ALL.iter().map(|&cl| theory::location_risk(cl, eps, 10, 1.0).unwrap()).collect();
        ordered &= c <= i && i <= j && lib[0] <= lib[1] && lib[1] <= lib[2];
        ordered &= (lib[0] - c).abs() <= IDENTITY_TOL * c
            && (lib[1] - i).abs() <= IDENTITY_TOL * i
            && (lib[2] - j).abs() <= IDENTITY_TOL * j;
    }
    parts.push(if ordered { Ok("formula order".into()) } else { Err("formula order violated".into()) });
    let setup = ExperimentConfig::location().setup().unwrap();
    let grid: Vec<(f64, f64)> = [0.05, 0.2, 1.0].iter().map(|&e| (f64::NAN, e)).collect();
    let report = sweep_eps(&setup, &grid, 20_000, 1000).map_err(|e| e.to_string())?;
    for chunk in report.rows.chunks(3) {
        for w in chunk.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let slack = K_SE * a.std_error.hypot(b.std_error);
            let msg = format!(
                "eps={} {} {:.4e} <= {} {:.4e}",
                a.eps, a.shift_class, a.minimax_empirical, b.shift_class, b.minimax_empirical
            );
            parts.push(if a.minimax_empirical <= b.minimax_empirical + slack { Ok(msg) } else { Err(msg) });
        }
    }
    all(parts)
}

fn c11() -> Outcome {
    let mut parts = Vec::new();
    let mut problems: Vec<(Problem, DistributionSpec, usize)> = vec![
        (Problem::Location, location_dist(), 10),
        (Problem::Uniform, DistributionSpec::UniformLocation { theta: 3.0 }, 50),
    ];
    for hetero in [false, true] {
        problems.push((Problem::LinearRegression, ExperimentConfig::regression(hetero, 7).dist, 10));
    }
    let dens = ExperimentConfig::density(2.0).unwrap();
    let mut seed = 1100;
    for eps in [0.05, 0.2, 1.0] {
        for (problem, dist, n) in &problems {
            let cat = catalog(*problem, eps, dist, *n).map_err(|e| e.to_string())?;
            for entry in cat {
                seed += 1;
                let cost = budget_check(dist, &entry.spec, *n, eps, TRIALS, seed).map_err(|e| e.to_string())?;
                let msg = format!("{problem} {} eps={eps}: {:.4e} vs {:.4e}", entry.label, cost.mean, eps * eps);
                parts.push(if cost.within_budget { Ok(msg) } else { Err(msg) });
            }
        }
        let pair = density::pair_from_spec(&dens.dist, eps).map_err(|e| e.to_string())?;
        let msg = format!("bump pair eps={eps}: certified {:.4e}", pair.eps_certified);
        parts.push(if pair.eps_certified <= eps { Ok(msg) } else { Err(msg) });
    }
    for &n in &[2usize, 10, 50] {
        for &t in &[0.3, 1.0, 4.0] {
            for k in 0..20 {
                let eps = 0.05 * k as f64;
                let (z, p) = perturbations::ids_parameters(eps, n, t);
                let lhs = z * z * t + p * p;
                if (lhs - eps * eps).abs() > IDENTITY_TOL * (eps * eps).max(1e-300) {
                    parts.push(Err(format!("ids identity n={n} t={t} eps={eps}: {lhs} vs {}", eps * eps)));
                }
            }
        }
    }
    all(parts)
}

fn c12() -> Outcome {
    let s = 2.0;
    let big_l = density::default_holder_constant(s, 1.0);
    let x0 = density::centered_x0(s, big_l, 1.0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();

    let clean = density::unshifted_pair(s, big_l, 1.0, x0).map_err(|e| e.to_string())?;
    let ns: Vec<usize> = (8..=16).map(|k| 1usize << k).collect();
    let curve = density::kde_risk_curve(&clean, &ns, KDE_TRIALS, 1200).map_err(|e| e.to_string())?;
    let x: Vec<f64> = curve.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = curve.iter().map(|p| p.risk.mean).collect();
    let slope = loglog_slope(&x, &y).map_err(|e| e.to_string())?;
    let msg = format!("kde slope {slope:.4} vs -0.8");
    parts.push(if (slope + 0.8).abs() <= SLOPE_TOL { Ok(msg) } else { Err(msg) });

    let eps = [0.1, 0.2, 0.4, 0.8];
    let gaps: Vec<f64> = eps
        .iter()
        .map(|&e| build_pair(e, s, big_l, 1.0, x0).map(|p| p.pointwise_gap))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let slope = loglog_slope(&eps, &gaps).map_err(|e| e.to_string())?;
    let msg = format!("gap slope {slope:.4} vs 0.8");
    parts.push(if (slope - 0.8).abs() <= SLOPE_TOL { Ok(msg) } else { Err(msg) });

    let mut agree = true;
    for s in [1.0, 2.0, 5.0] {
        for n in [16usize, 256, 4096] {
            let thr = (n as f64).powf(-(s + 2.0) / (2.0 * s + 1.0));
            for k in 0..60 {
                let eps = 10f64.powf(-6.0 + 6.0 * k as f64 / 60.0);
                if ((eps / thr).ln()).abs() < 1e-9 {
                    continue;
                }
                let b = theory::density_bounds(eps, n, s).map_err(|e| e.to_string())?;
                agree &= (b.lower == b.upper) == (eps <= thr);
            }
        }
    }
    parts.push(if agree {
        Ok("coincidence threshold".into())
    } else {
        Err("bounds coincide off the threshold".into())
    });
    all(parts)
}

fn c13() -> Outcome {
    let mut cfg = ExperimentConfig::location();
    cfg.trials = 500;
    cfg.master_seed = 1300;
    let render = |threads| cmd_sweep(&cfg, Some(threads)).and_then(|t| t.to_csv()).map_err(|e| e.to_string());
    let a = render(1)?;
    let b = render(1)?;
    let c = render(8)?;
    if a == b && a == c {
        Ok(format!("{} bytes identical", a.len()))
    } else {
        Err("sweep output differs between runs".into())
    }
}

fn c14() -> Outcome {
    let mut parts = Vec::new();
    for eps in [0.05, 0.3, 1.0] {
        for n in [5usize, 20, 100] {
            for sigma in [0.5, 2.0] {
                let p = 4;
                let m1 = m_i(eps, n as f64, sigma * sigma);
                let mp = m_i(eps, n as f64, p as f64 * sigma * sigma);
                let tools = [
                    (LowerBoundTool::LeCamGauss1d { eps, sigma, n }, m1, "lecam"),
                    (LowerBoundTool::FanoGauss { eps, sigma, n, p }, mp, "fano"),
                    (LowerBoundTool::AssouadGauss { eps, sigma, n, p }, mp, "assouad"),
                ];
                for (tool, exact, name) in tools {
                    let v = theory::lower_bound(&tool, Phi::Square).map_err(|e| e.to_string())?.value;
                    let msg = format!("{name} eps={eps} n={n} sigma={sigma}: {v:.4e} <= {exact:.4e}");
                    parts.push(if v <= exact { Ok(msg) } else { Err(msg) });
                }
            }
        }
    }
    all(parts)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("location JDS exactness", c1),
        ("location IDS transition", c2),
        ("regression prediction exactness", c3),
        ("heteroskedastic GLS", c4),
        ("uniform CDS exactness", c5),
        ("uniform sandwich", c6),
        ("smoothed uniform closed forms", c7),
        ("gaussian W2 oracle", c8),
        ("bayes limits", c9),
        ("class ordering", c10),
        ("budget validation", c11),
        ("density rates", c12),
        ("determinism", c13),
        ("lower-bound tools", c14),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("[PASS] {:>2} {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("[FAIL] {:>2} {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
