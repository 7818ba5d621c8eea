use std::path::Path;
use std::process::{Command, Output};

use secpower::harness::{EvalReport, LabeledDataset, DATASET_COLUMNS, REPORT_COLUMNS};
use secpower::model::{effective_gains, ChannelInstance, ScenarioParams, SystemParams};
use secpower::nn::{ModelRecord, Regularization};
use secpower::solver::{closed_form, SolveResult};

fn secpower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secpower"))
        .args(args)
        .env_remove("SECPOWER_CONFIG")
        .output()
        .expect("spawn secpower")
}

fn ok(args: &[&str]) -> Output {
    let out = secpower(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const INSTANCE: &str = r#"{"h_s":0.3,"h_p":0.12,"h_e":0.05,"g_s":0.04,"g_e":0.06}"#;

fn instance() -> ChannelInstance {
    serde_json::from_str(INSTANCE).unwrap()
}

#[test]
fn solve_prints_the_optimum() {
    let out = ok(&["solve", "--instance", INSTANCE, "--pt", "100", "--q", "1"]);
    let res: SolveResult = serde_json::from_slice(&out.stdout).unwrap();
    let g = effective_gains(&instance(), &SystemParams::default(), false);
    let cf = closed_form(&g, &ScenarioParams::new(100.0, 1.0).unwrap());
    assert!((res.p_star - cf.p_star).abs() <= 1e-4);
    assert!((res.rate_star - cf.rate_star).abs() <= 1e-9);
}

#[test]
fn solve_reads_instance_files_and_robust_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    std::fs::write(&path, r#"{"h_s":0.3,"h_p":0.12,"h_e":0.05,"g_s":0.04,"g_e":0.06,"eps_s":0.05,"eps_e":0.05,"eps_p":0.05}"#)
        .unwrap();
    let robust: SolveResult =
        serde_json::from_slice(&ok(&["solve", "--instance", &s(&path), "--robust"]).stdout)
            .unwrap();
    let nominal: SolveResult =
        serde_json::from_slice(&ok(&["solve", "--instance", INSTANCE]).stdout).unwrap();
    assert!(robust.rate_star < nominal.rate_star);
    // Radii without --robust are a usage error.
    assert_eq!(
        secpower(&["solve", "--instance", &s(&path)]).status.code(),
        Some(2)
    );
}

#[test]
fn config_file_overrides_system_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"system": {"primary_power": 600.0}}"#).unwrap();
    let base: SolveResult =
        serde_json::from_slice(&ok(&["solve", "--instance", INSTANCE]).stdout).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_secpower"))
        .args(["solve", "--instance", INSTANCE])
        .env("SECPOWER_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let louder: SolveResult = serde_json::from_slice(&out.stdout).unwrap();
    // More primary interference at the receiver lowers the secrecy rate.
    assert!(louder.rate_star < base.rate_star);

    std::fs::write(&cfg, r#"{"system": {"primary_power": -1.0}}"#).unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_secpower"))
        .args(["solve", "--instance", INSTANCE])
        .env("SECPOWER_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(
        secpower(&["gen-data", "--n", "0", "--out", "/dev/null"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        secpower(&["gen-data", "--n", "5", "--q", "-1", "--out", "/dev/null"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        secpower(&["solve", "--instance", "{not json"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let data = s(&dir.path().join("d.csv"));
    ok(&["gen-data", "--n", "50", "--seed", "1", "--out", &data]);
    let model = s(&dir.path().join("m.json"));
    let diverge = secpower(&[
        "train",
        "--data",
        &data,
        "--lr",
        "1e30",
        "--optimizer",
        "gd",
        "--dims",
        "8,4,1",
        "--out-model",
        &model,
    ]);
    assert_eq!(
        diverge.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&diverge.stderr)
    );
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn full_pipeline_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| s(&dir.path().join(n));
    let radii = ["--eps-s", "0.1", "--eps-e", "0.1", "--eps-p", "0.1"];

    let mut gen = vec!["gen-data", "--n", "600", "--seed", "2", "--mixed", "--out"];
    let data = p("data.csv");
    gen.push(&data);
    gen.extend(radii);
    ok(&gen);
    let ds = LabeledDataset::load(&data).unwrap();
    ds.verify().unwrap();
    assert_eq!(ds.len(), 600);
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), DATASET_COLUMNS.join(","));

    let test = p("test.csv");
    let mut gen_test = vec![
        "gen-data", "--n", "100", "--seed", "3", "--robust", "--out", &test,
    ];
    gen_test.extend(radii);
    ok(&gen_test);

    let mut models = Vec::new();
    for reg in ["none", "l1", "l2"] {
        let model = p(&format!("{reg}.json"));
        let history = p(&format!("{reg}.hist.csv"));
        ok(&[
            "train",
            "--data",
            &data,
            "--reg",
            reg,
            "--epochs",
            "2",
            "--dims",
            "8,6,1",
            "--out-model",
            &model,
            "--history",
            &history,
        ]);
        let rec = ModelRecord::load(&model).unwrap();
        assert_eq!(
            rec.config.regularization,
            reg.parse::<Regularization>().unwrap()
        );
        assert_eq!(rec.layer_dims, vec![8, 6, 1]);
        // 500 training rows, batch 10, 2 epochs, sampled every 100 steps.
        let hist = std::fs::read_to_string(&history).unwrap();
        assert_eq!(hist.lines().next().unwrap(), "step,train_mse,val_mse");
        assert_eq!(hist.lines().count(), 1 + 1);
        models.push(model);
    }

    let report = p("report.json");
    let mut eval = vec![
        "eval",
        "--test",
        &test,
        "--format",
        "json",
        "--out-report",
        &report,
        "--models",
    ];
    eval.extend(models.iter().map(String::as_str));
    ok(&eval);
    let rep = EvalReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep.rows, 100);
    assert_eq!(rep.schemes.len(), 3);

    let csv = ok(&["report", "--in", &report, "--format", "csv"]).stdout;
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 1 + 3 + 1);

    // A test set for another leakage cap is refused.
    let other = p("other.csv");
    ok(&["gen-data", "--n", "10", "--q", "2", "--out", &other]);
    assert_eq!(
        secpower(&["eval", "--test", &other, "--models", &models[0]])
            .status
            .code(),
        Some(2)
    );
}
