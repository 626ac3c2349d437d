use shiftrisk::experiment::{cmd_bounds, cmd_risk_matrix, verify_with, ExperimentConfig};
use shiftrisk::perturbations::ShiftClass;
use shiftrisk::risk::theory_for;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn shiftrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftrisk")).args(args).output().unwrap()
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for name in ["location", "regression", "regression_heteroskedastic", "uniform", "density"] {
        let path = configs().join(format!("{name}.toml"));
        let cfg = ExperimentConfig::from_path(&path).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
    assert_eq!(ExperimentConfig::from_path(&configs().join("location.toml")).unwrap(), ExperimentConfig::location());
    assert_eq!(ExperimentConfig::from_path(&configs().join("uniform.toml")).unwrap(), ExperimentConfig::uniform());
}

#[test]
fn location_risk_matrix_is_two_by_four() {
    let out =
        shiftrisk(&["risk-matrix", "--config", configs().join("location.toml").to_str().unwrap(), "--trials", "50"]);
    // the shipped config sweeps many budgets
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one budget"));

    let mut cfg = ExperimentConfig::location();
    cfg.alphas = None;
    cfg.eps_list = Some(vec![0.1]);
    cfg.trials = 50;
    let t = cmd_risk_matrix(&cfg, None).unwrap();
    assert_eq!(t.columns, ["estimator", "perturbation", "mean", "std_error", "trials", "seed"]);
    assert_eq!(t.rows.len(), 8);
}

#[test]
fn uniform_risk_matrix_is_27_by_26() {
    let mut cfg = ExperimentConfig::uniform();
    cfg.alphas = Some(vec![-1.0]);
    cfg.trials = 2;
    let t = cmd_risk_matrix(&cfg, None).unwrap();
    assert_eq!(t.rows.len(), 27 * 26);
}

#[test]
fn invalid_trials_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(configs().join("location.toml")).unwrap().replace("trials = 5000", "trials = 1");
    std::fs::write(&path, text).unwrap();
    let out = shiftrisk(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));

    let out = shiftrisk(&["sweep", "--config", configs().join("location.toml").to_str().unwrap(), "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = shiftrisk(&["sweep", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_class_list_is_rejected() {
    let text = std::fs::read_to_string(configs().join("location.toml"))
        .unwrap()
        .replace("shift_classes = [\"CDS\", \"IDS\", \"JDS\"]", "shift_classes = []");
    let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
    assert!(err.to_string().contains("shift_classes"));
}

#[test]
fn bounds_writes_json_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bounds.json");
    let out = shiftrisk(&[
        "bounds",
        "--config",
        configs().join("uniform.toml").to_str().unwrap(),
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(rows.len(), 13);
    let first = &rows[0];
    for key in ["alpha", "eps", "CDS_exact", "IDS_lower", "JDS_upper", "rate_only"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    assert!(first["CDS_exact"].as_f64().unwrap() > 0.0);
}

#[test]
fn density_bounds_are_rate_only() {
    for s in [2.0, 5.0] {
        let mut cfg = ExperimentConfig::density(2.0).unwrap();
        if let shiftrisk::DistributionSpec::HolderBumpDensity { s: ref mut sv, .. } = cfg.dist {
            *sv = s;
        }
        let t = cmd_bounds(&cfg).unwrap();
        let col = t.column("rate_only").unwrap();
        assert!(t.rows.iter().all(|r| r[col] == shiftrisk::experiment::Value::Bool(true)));
    }
}

#[test]
fn verify_passes_and_detects_corrupted_theory() {
    let mut cfg = ExperimentConfig::location();
    cfg.alphas = Some(vec![-1.5, -0.5]);
    cfg.trials = 4000;
    cfg.master_seed = 5;
    let good = verify_with(&cfg, None, &theory_for).unwrap();
    assert!(good.passed(), "{:?}", good.failures());

    let corrupt = |setup: &_, class, eps| {
        let mut b = theory_for(setup, class, eps)?;
        if class == ShiftClass::Jds {
            b.exact = b.exact.map(|v| 1.5 * v);
        }
        Ok(b)
    };
    let bad = verify_with(&cfg, None, &corrupt).unwrap();
    let names: Vec<&str> = bad.failures().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names.len(), 2);
    assert!(names.iter().all(|n| n.contains("/JDS/")));
}

#[test]
fn verify_cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::location();
    cfg.alphas = Some(vec![-1.0]);
    cfg.trials = 2000;
    let path = dir.path().join("loc.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let out = shiftrisk(&["verify", "--config", path.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("check,passed,value,lower,upper,tolerance\n"));
}

#[test]
fn sweep_output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::regression(true, 7);
    cfg.alphas = Some(vec![-1.0, 0.0]);
    cfg.trials = 300;
    let path = dir.path().join("reg.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let p = path.to_str().unwrap();
    let a = shiftrisk(&["sweep", "--config", p, "--threads", "1", "--seed", "9"]);
    let b = shiftrisk(&["sweep", "--config", p, "--threads", "8", "--seed", "9"]);
    let c = shiftrisk(&["sweep", "--config", p, "--threads", "8", "--seed", "10"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn runtime_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::location();
    cfg.eps_list = Some(vec![0.1]);
    cfg.alphas = None;
    cfg.trials = 10;
    let path = dir.path().join("loc.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let blocked = dir.path().join("no_such_dir").join("out.csv");
    let out = shiftrisk(&["risk-matrix", "--config", path.to_str().unwrap(), "--out", blocked.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
