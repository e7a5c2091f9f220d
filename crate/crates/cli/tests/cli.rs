//! Command-line behaviour of the `psp` binary.

use std::path::Path;
use std::process::{Command, Output};

use psp_cli::config::Model;
use psp_cli::report::read_daily;
use psp_cli::{synthetic_config, write_synthetic, RunConfig};

fn psp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psp")).args(args).output().unwrap()
}

fn small_config(dir: &Path, days: usize) -> RunConfig {
    let data = dir.join("data");
    write_synthetic(&data, 3, days).unwrap();
    let mut cfg = synthetic_config(&data, &dir.join("out"), 77);
    cfg.simulation.n_paths = 200;
    cfg.simulation.sigma = 0.011;
    cfg
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path.display().to_string()
}

#[test]
fn config_init_prints_valid_defaults() {
    let out = psp(&["config", "init"]);
    assert!(out.status.success());
    let cfg = RunConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn empty_model_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.models.clear();
    let path = write_config(dir.path(), &cfg);
    let out = psp(&["run", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_model_flag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &RunConfig::default());
    let out = psp(&["run", "--config", &path, "--models", "psp,garch"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_chain_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.paths.chains = dir.path().join("nowhere").join("chains.csv");
    let path = write_config(dir.path(), &cfg);
    let out = psp(&["run", "--config", &path]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("nowhere"), "{stderr}");
}

#[test]
fn plot_data_without_a_run_names_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = psp(&["emit-plot-data", &dir.path().display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("manifest.json"));
}

#[test]
fn full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 25);
    let path = write_config(dir.path(), &cfg);
    let out = psp(&["run", "--config", &path, "--plots"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run = dir.path().join("out");
    for f in ["manifest.json", "backtest_report.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_dir(run.join("surfaces")).unwrap().count(), 25);
    let report: psp_cli::BacktestReport =
        serde_json::from_str(&std::fs::read_to_string(run.join("backtest_report.json")).unwrap()).unwrap();
    assert_eq!(report.n_days, 23);
    assert_eq!(report.levels.len(), 2);
    assert!(report.levels.iter().all(|l| l.methods.len() == 3 && l.dm.len() == 3));

    let plots: Vec<_> = std::fs::read_dir(run.join("plots")).unwrap().collect();
    assert_eq!(plots.len(), 6);

    for model in Model::ALL {
        let pnl_files = std::fs::read_dir(run.join("pnl").join(model.name())).unwrap().count();
        assert_eq!(pnl_files, 2 * 23, "{model}: csv and meta per day");
        let daily = read_daily(&run, model, 2).unwrap();
        let plot = std::fs::read_to_string(run.join("plots").join(format!("{}_90.csv", model.name()))).unwrap();
        let mut lines = plot.lines();
        assert_eq!(lines.next(), Some("date,return,neg_var,hit"));
        for (line, row) in lines.zip(&daily) {
            let cols: Vec<&str> = line.split(',').collect();
            let ret: f64 = cols[1].parse().unwrap();
            let neg_var: f64 = cols[2].parse().unwrap();
            assert_eq!(cols[3] == "1", ret < neg_var);
            assert_eq!(ret, row.ret);
        }
    }

    // Recomputing the report from the daily files reproduces it byte for byte.
    let before = std::fs::read(run.join("backtest_report.json")).unwrap();
    let out = psp(&["backtest", &run.display().to_string()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(run.join("backtest_report.json")).unwrap(), before);
}

#[test]
fn fit_surfaces_only_writes_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 5);
    let path = write_config(dir.path(), &cfg);
    let out = psp(&["fit-surfaces", "--config", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out");
    assert_eq!(std::fs::read_dir(run.join("surfaces")).unwrap().count(), 5);
    assert!(!run.join("manifest.json").exists());
}

#[test]
fn seed_override_changes_distributions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 6);
    let path = write_config(dir.path(), &cfg);
    let a = dir.path().join("a").display().to_string();
    let b = dir.path().join("b").display().to_string();
    assert!(psp(&["run", "--config", &path, "--output-dir", &a, "--models", "psp"]).status.success());
    assert!(psp(&["run", "--config", &path, "--output-dir", &b, "--models", "psp", "--seed", "5"]).status.success());
    let day = std::fs::read_dir(Path::new(&a).join("pnl").join("psp"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .find(|n| n.to_string_lossy().ends_with(".csv"))
        .unwrap();
    let fa = std::fs::read(Path::new(&a).join("pnl").join("psp").join(&day)).unwrap();
    let fb = std::fs::read(Path::new(&b).join("pnl").join("psp").join(&day)).unwrap();
    assert_ne!(fa, fb);
}
