use std::path::Path;
use std::process::Command as Proc;

use shearlab::cli::{run_command, Command, Diagnostic, RunOptions, EXIT_CONFIG, EXIT_CRITERION, EXIT_OK};
use shearlab::config::{ProfileSpec, RunConfig, OUT_DIR_ENV};
use shearlab::report::Format;
use shearlab::resolvent::PsiEstimate;

const BIN: &str = env!("CARGO_BIN_EXE_shearlab");

fn opts(dir: &Path) -> RunOptions {
    RunOptions { out: Some(dir.to_path_buf()), ..Default::default() }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn taylor_couette_profile_check_fails_at_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { profile: ProfileSpec::TaylorCouette, ..Default::default() };
    let out = run_command(Command::ProfileCheck, &cfg, &opts(dir.path()));
    assert_eq!(out.exit_code, EXIT_CRITERION);
    let d: Diagnostic = serde_json::from_str(&read(dir.path(), "diagnostic.json")).unwrap();
    assert_eq!(d.message, "infinity non-degeneracy failed");
    assert_eq!(d.exit_code, 2);
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "profile_check.json")).unwrap();
    assert_eq!(report["local"]["pass"], true);
    assert_eq!(report["infinity"]["trend"], "vanishing");
}

#[test]
fn binary_reports_diagnostic_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"profile": {"name": "taylor_couette"}}"#);
    let out = Proc::new(BIN)
        .args(["profile-check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let d: Diagnostic = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(d.message, "infinity non-degeneracy failed");
    assert!(dir.path().join("diagnostic.json").exists());
}

#[test]
fn missing_k_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"profile": {"name": "couette"}, "nu": 1e-3}"#);
    let out = Proc::new(BIN).arg("resolvent-psi").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let d: Diagnostic = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(d.kind, "config");
    assert!(d.message.contains("`k`"));
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"profile": {"name": "couette"}, "nu": }"#);
    let out = Proc::new(BIN).arg("resolvent-psi").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let unknown = write_config(dir.path(), r#"{"profile": {"name": "couette"}, "nu": 1e-3, "k": 1, "colour": 3}"#);
    let out = Proc::new(BIN).arg("resolvent-psi").arg("--config").arg(&unknown).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn nonpositive_tolerance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(r#"{"profile": {"name": "poiseuille"}, "nu": 0.01, "k": 1}"#).unwrap();
    let bad = RunConfig { decay: shearlab::semigroup::DecayConfig { power_tol: -1.0, ..cfg.decay }, ..cfg };
    assert_eq!(run_command(Command::SemigroupDecay, &bad, &opts(dir.path())).exit_code, EXIT_CONFIG);
}

#[test]
fn resolvent_psi_writes_scan_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(r#"{"profile": {"name": "poiseuille"}, "nu": 1e-2, "k": 1}"#).unwrap();
    let out = run_command(Command::ResolventPsi, &cfg, &opts(dir.path()));
    assert_eq!(out.exit_code, EXIT_OK, "{:?}", out.diagnostic);
    let text = read(dir.path(), "psi.json");
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["psi", "lambda_star", "grid_converged"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let est: PsiEstimate = serde_json::from_str(&text).unwrap();
    assert!(est.psi > 0.0);
    let csv = read(dir.path(), "resolvent_scan.csv");
    assert_eq!(csv.lines().next().unwrap(), "lambda,sigma_min");
    assert_eq!(csv.lines().count(), est.scan.len() + 1);
}

#[test]
fn sweep_scaling_table_has_six_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(
        r#"{"profile": {"name": "poiseuille"}, "nu_list": [1.0, 2.0], "k_list": [0.05, 0.1]}"#,
    )
    .unwrap();
    let out = run_command(Command::SweepScaling, &cfg, &opts(dir.path()));
    assert_eq!(out.exit_code, EXIT_OK, "{:?}", out.diagnostic);
    let csv = read(dir.path(), "rate_table.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "nu,k,psi,semigroup_rate,regime,grid_converged");
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.split(',').count() == 6));
    assert!(lines[1].ends_with(",taylor,true"));
}

#[test]
fn levelset_measure_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(
        r#"{"profile": {"name": "kolmogorov"}, "lambda_grid": [-0.5, 0.0, 0.5], "delta_grid": [0.1, 0.05]}"#,
    )
    .unwrap();
    for (format, file) in [(Format::Csv, "measure_sweep.csv"), (Format::Json, "measure_sweep.json"), (Format::GnuplotData, "measure_sweep.dat")] {
        let o = RunOptions { format, out: Some(dir.path().to_path_buf()) };
        assert_eq!(run_command(Command::LevelsetMeasure, &cfg, &o).exit_code, EXIT_OK);
        let text = read(dir.path(), file);
        match format {
            Format::Csv => assert_eq!(text.lines().next().unwrap(), "lambda,delta,m,measure_E,measure_Ecal,ratio,saturated"),
            Format::Json => assert_eq!(serde_json::from_str::<serde_json::Value>(&text).unwrap().as_array().unwrap().len(), 6),
            Format::GnuplotData => assert!(text.starts_with("# x: lambda  y: ratio\n")),
        }
    }
}

#[test]
fn empty_lists_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(r#"{"profile": {"name": "kolmogorov"}, "delta_grid": [0.1]}"#).unwrap();
    let out = run_command(Command::LevelsetMeasure, &cfg, &opts(dir.path()));
    assert_eq!(out.exit_code, EXIT_CONFIG);
    assert!(!dir.path().join("measure_sweep.csv").exists());
    assert!(dir.path().join("diagnostic.json").exists());
}

#[test]
fn tensor_check_rejects_flat_factor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(
        r#"{"profile": {"name": "couette"}, "tensor_factors": [{"name": "poiseuille"}, {"name": "taylor_couette"}], "nu": 1e-2, "k": 1}"#,
    )
    .unwrap();
    let out = run_command(Command::TensorCheck, &cfg, &opts(dir.path()));
    assert_eq!(out.exit_code, EXIT_CRITERION);
    assert!(out.diagnostic.unwrap().message.contains("infinity non-degeneracy failed"));
}

#[test]
fn decay_csv_is_deterministic() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_json(
            r#"{"profile": {"name": "poiseuille"}, "nu": 1e-2, "k": 1, "seed": 11,
                "decay": {"ensemble_size": 4, "power_steps": 6, "checkpoints": 12}}"#,
        )
        .unwrap();
        let out = run_command(Command::SemigroupDecay, &cfg, &opts(dir.path()));
        assert_eq!(out.exit_code, EXIT_OK, "{:?}", out.diagnostic);
        let csv = std::fs::read(dir.path().join("decay.csv")).unwrap();
        let summary: serde_json::Value = serde_json::from_str(&read(dir.path(), "decay_summary.json")).unwrap();
        assert_eq!(summary["verdict"], true);
        csv
    };
    let a = run();
    assert_eq!(a, run());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,norm_bound,method");
    assert!(!text.contains('\r'));
}

#[test]
fn output_directory_precedence() {
    let root = tempfile::tempdir().unwrap();
    let (from_cfg, from_env, from_flag) = (root.path().join("cfg"), root.path().join("env"), root.path().join("flag"));
    let cfg_text = format!(r#"{{"profile": {{"name": "couette"}}, "output_dir": {:?}}}"#, from_cfg.to_str().unwrap());
    let cfg = write_config(root.path(), &cfg_text);
    let run = |env: bool, flag: bool| {
        let mut c = Proc::new(BIN);
        c.arg("profile-check").arg("--config").arg(&cfg).env_remove(OUT_DIR_ENV);
        if env {
            c.env(OUT_DIR_ENV, &from_env);
        }
        if flag {
            c.arg("--out").arg(&from_flag);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
    };
    run(false, false);
    assert!(from_cfg.join("profile_check.json").exists());
    run(true, false);
    assert!(from_env.join("profile_check.json").exists());
    run(true, true);
    assert!(from_flag.join("profile_check.json").exists());
}

#[test]
fn counterexample_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(
        r#"{"profile": {"name": "taylor_couette"}, "nu": 1e-2, "k": 1, "L_list": [10, 40],
            "solver": {"coarse_points": 128, "check_grid": false}}"#,
    )
    .unwrap();
    let out = run_command(Command::Counterexample, &cfg, &opts(dir.path()));
    assert_eq!(out.exit_code, EXIT_OK, "{:?}", out.diagnostic);
    let csv = read(dir.path(), "counterexample.csv");
    assert_eq!(csv.lines().next().unwrap(), "L,psi");
    assert_eq!(csv.lines().count(), 3);
}
