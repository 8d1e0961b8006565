use std::path::Path;
use std::process::Command;

use nemfilm_harness::config::RunConfig;
use nemfilm_harness::pipeline::execute;

fn nemfilm() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nemfilm"));
    c.env("NEMFILM_WORKERS", "1");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"
recipe = "theorem-a"
[domain]
resolution = 16
[schedule]
eps = [0.25, 0.18]
"#;

#[test]
fn run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = nemfilm().arg("run").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["report.json", "field.csv", "grid.csv", "defects.csv", "director.csv", "checkpoint.csv", "config.toml"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["defects"]["defects"].as_array().unwrap().len(), 2);
    let header = std::fs::read_to_string(out.join("field.csv")).unwrap();
    assert!(header.starts_with("x,y,p1,p2,r\n"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[init]\nkind = \"random\"\nrandom_starts = 1\n");
    let cfg = write_config(dir.path(), &text);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        nemfilm().arg("run").arg(&cfg).arg("--out").arg(&out).status().unwrap();
        reports.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("field.csv")).unwrap()));
    }
    assert!(reports[0] == reports[1]);
}

#[test]
fn pohozaev_on_an_ellipse_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "recipe = \"pohozaev\"\n[domain]\nshape = \"ellipse\"\n");
    let output = nemfilm().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("disk"));
}

#[test]
fn failed_check_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    // three rungs cannot come within 0.1% of the asymptotic slope
    let text = "recipe = \"theorem-c\"\n[domain]\nresolution = 16\n[schedule]\neps = [0.3, 0.25, 0.2, 0.15, 0.07]\n[checks]\nfit_tolerance = 1e-3\n";
    let cfg = write_config(dir.path(), text);
    let status = nemfilm().arg("run").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn wmap_writes_a_table_and_its_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[domain]\nresolution = 16\n");
    let out = dir.path().join("w");
    let status = nemfilm().args(["wmap"]).arg(&cfg).args(["--k", "1", "--scan", "10", "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("wmap.csv")).unwrap();
    assert!(table.starts_with("b1x,b1y,W\n"));
    assert!(table.lines().count() > 20);
    let argmin: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("argmin.json")).unwrap()).unwrap();
    let p = &argmin["config"]["points"][0];
    assert!(p[0].as_f64().unwrap().hypot(p[1].as_f64().unwrap()) < 0.05);
}

#[test]
fn k_sweep_reports_one_row_per_winding() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("s");
    let status = nemfilm()
        .arg("sweep")
        .arg(&cfg)
        .args(["--param", "k", "--from", "1", "--to", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1,") && rows[1].starts_with("2,"));
}

#[test]
fn theorem_a_recipe_finds_two_half_degree_defects() {
    let config = RunConfig::from_toml(SMALL).unwrap();
    let outcome = execute(&config).unwrap();
    let set = outcome.report.defects.as_ref().unwrap();
    assert_eq!(set.defects.len(), 2);
    assert!(set.defects.iter().all(|d| d.winding == 1));
    assert!(outcome.report.checks.iter().any(|c| c.name == "defect_count" && c.passed));
}

#[test]
fn conjugated_data_gives_negative_windings() {
    let text = format!("{SMALL}\n[boundary]\nconjugate = true\n");
    let outcome = execute(&RunConfig::from_toml(&text).unwrap()).unwrap();
    let set = outcome.report.defects.as_ref().unwrap();
    assert_eq!(set.defects.len(), 2);
    assert!(set.defects.iter().all(|d| d.winding == -1));
    assert!(outcome.report.passed);
}
