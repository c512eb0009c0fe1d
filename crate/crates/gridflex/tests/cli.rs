//! End-to-end tests of the `gridflex` binary: exit codes, file outputs, and
//! the simulate -> grid -> report flow.

use gridflex::config::ScenarioConfig;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridflex"))
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gridflex-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_default_config(dir: &Path) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, ScenarioConfig::default().to_toml()).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn shipped_default_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = ScenarioConfig::from_path(&path).unwrap();
    assert_eq!(cfg.run.horizon_hours, 1);
    assert_eq!(cfg.grid.generators.len(), 4);
}

#[test]
fn gen_signal_writes_importable_csv() {
    let dir = work_dir("gen-sig");
    let out = dir.join("noisy.csv");
    let output = run(bin().args([
        "gen",
        "signal",
        "--kind",
        "noisy",
        "--duration-h",
        "1",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(output.status.success(), "{output:?}");
    let imported =
        gridflex::signals::import_series(&out, gridflex::signals::SeriesSchema::Signal).unwrap();
    match imported {
        gridflex::signals::ImportedSeries::Signal(sig) => {
            assert_eq!(sig.len(), 1800);
            assert!(gridflex::signals::validate_signal(&sig).is_valid());
        }
        _ => unreachable!(),
    }
}

#[test]
fn gen_trace_matches_requested_stats() {
    let dir = work_dir("gen-trace");
    let out = dir.join("low_low.csv");
    let output = run(bin().args([
        "gen",
        "trace",
        "--mean",
        "28.66",
        "--variance",
        "12.48",
        "--min",
        "23",
        "--max",
        "36",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(output.status.success(), "{output:?}");
    let trace = match gridflex::signals::import_series(
        &out,
        gridflex::signals::SeriesSchema::Trace,
    )
    .unwrap()
    {
        gridflex::signals::ImportedSeries::Trace(t) => t,
        _ => unreachable!(),
    };
    let stats = gridflex::signals::trace_stats(&trace).unwrap();
    assert!((stats.mean_pct - 28.66).abs() <= 1.5);
    assert!((stats.variance - 12.48).abs() <= 0.25 * 12.48);
}

#[test]
fn invalid_kind_exits_2_with_usage() {
    let output = run(bin().args([
        "gen",
        "signal",
        "--kind",
        "bogus",
        "--out",
        "x.csv",
    ]));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr).to_lowercase();
    assert!(
        stderr.contains("usage") || stderr.contains("possible values"),
        "{stderr}"
    );
}

#[test]
fn missing_trace_file_exits_2_and_names_path() {
    let dir = work_dir("missing");
    let mut cfg = ScenarioConfig::default();
    cfg.trace.source = gridflex::config::SourceKind::File;
    cfg.trace.path = Some(PathBuf::from("no/such/trace.csv"));
    let path = dir.join("scenario.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let output = run(bin().args(["simulate", "--config", path.to_str().unwrap()]));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no/such/trace.csv"), "{stderr}");
}

#[test]
fn report_without_prior_outputs_exits_3() {
    let dir = work_dir("report-early");
    let config = write_default_config(&dir);
    let out_dir = dir.join("out");
    let output = run(bin().args([
        "report",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn full_pipeline_produces_consistent_reports() {
    let dir = work_dir("pipeline");
    let config = write_default_config(&dir);
    let out_dir = dir.join("out");
    for stage in ["simulate", "grid", "report"] {
        let output = run(bin().args([
            stage,
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]));
        assert!(
            output.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    for name in [
        "steps.csv",
        "scores.csv",
        "settlement.csv",
        "bids.csv",
        "sim_summary.json",
        "uc_with.csv",
        "uc_without.csv",
        "grid_summary.json",
        "carbon_report.json",
        "tco_report.json",
        "comparison.txt",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }

    // The emitted carbon numbers satisfy the operational-with-service
    // identity, the baseline provides nothing, and the grid stage retired a
    // plant.
    let carbon: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("carbon_report.json")).unwrap())
            .unwrap();
    let reports = carbon.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    for rep in reports {
        let c_op = rep["c_op"].as_f64().unwrap();
        let c_exo = rep["c_exogenous"].as_f64().unwrap();
        let with_rs = rep["c_op_with_rs"].as_f64().unwrap();
        assert!((with_rs - (c_op - c_exo)).abs() < 1e-6);
        if rep["scenario"] == "baseline" {
            assert_eq!(c_exo, 0.0);
        }
    }
    let grid: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("grid_summary.json")).unwrap())
            .unwrap();
    assert_eq!(grid["plant_hours_without"].as_u64(), Some(4));
    assert_eq!(grid["plant_hours_with"].as_u64(), Some(3));
    assert!(grid["mce_t_per_mw"].as_f64().unwrap() > 0.0);

    // Steps CSV rows round-trip as 6-digit decimal text.
    let steps = std::fs::read_to_string(out_dir.join("steps.csv")).unwrap();
    let mut lines = steps.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_s,target_w,achieved_w,lc_w,be_throughput"
    );
    let first = lines.next().unwrap();
    for field in first.split(',') {
        let (_, frac) = field.split_once('.').expect("decimal field");
        assert_eq!(frac.len(), 6, "{field}");
    }
}

#[test]
fn grid_sweep_writes_mce_pairs() {
    let dir = work_dir("sweep");
    let config = write_default_config(&dir);
    let out_dir = dir.join("out");
    let output = run(bin().args([
        "grid",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--sweep",
        "dc_regulation_mw=25,50,100",
    ]));
    assert!(output.status.success(), "{output:?}");
    let text = std::fs::read_to_string(out_dir.join("mce_sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r_dc_mw,mce_t_per_mw");
    assert_eq!(lines.count(), 3);
}

#[test]
fn env_seed_override_changes_outputs() {
    let dir = work_dir("env");
    let config = write_default_config(&dir);
    let run_with = |seed_env: Option<&str>, out: &Path| {
        let mut cmd = bin();
        cmd.args([
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        cmd.env_remove("GRIDFLEX_SEED");
        if let Some(seed) = seed_env {
            cmd.env("GRIDFLEX_SEED", seed);
        }
        assert!(run(&mut cmd).status.success());
    };
    run_with(None, &dir.join("a"));
    run_with(Some("777"), &dir.join("b"));
    let a = std::fs::read(dir.join("a/steps.csv")).unwrap();
    let b = std::fs::read(dir.join("b/steps.csv")).unwrap();
    assert_ne!(a, b, "seed override had no effect");
}
