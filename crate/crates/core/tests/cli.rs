use std::fs;
use std::path::Path;

use kdmi::cli::run;
use kdmi::fixtures;
use kdmi::simulator::{example12_world, generate_reports, generate_single_task, two_world_spectral, StrategyMatrix};
use serde_json::Value;

fn kdmi(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("kdmi").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_fixture(dir: &Path, name: &str) -> std::path::PathBuf {
    let p = dir.join(format!("{name}.csv"));
    fs::write(&p, fixtures::fixture_csv(name).unwrap()).unwrap();
    p
}

#[test]
fn cluster_writes_json_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "affine_7x2");
    let (out, svg) = (dir.path().join("r.json"), dir.path().join("r.svg"));
    let (code, stdout, _) = kdmi(&["cluster", path(&input), "--out", path(&out), "--svg", path(&svg)]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["k"], 3);
    assert_eq!(v["solver_tag"], "exact2d");
    assert_eq!(v["assignment"].as_array().unwrap().len(), 7);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn every_solver_flag_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "affine_7x2");
    let mut labels = Vec::new();
    for solver in ["auto", "exact", "kcofactors", "brute"] {
        let (code, stdout, err) =
            kdmi(&["cluster", path(&input), "--solver", solver, "--seed", "3", "--restarts", "8"]);
        assert_eq!(code, 0, "{solver}: {err}");
        let v: Value = serde_json::from_str(&stdout).unwrap();
        labels.push(v["assignment"].clone());
    }
    assert!(labels.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,x\n").unwrap();
    let (code, _, err) = kdmi(&["cluster", path(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("row 2, column 2"), "{err}");

    let three_d = write_fixture(dir.path(), "dmi_20x3");
    let svg = dir.path().join("x.svg");
    let (code, _, _) = kdmi(&["cluster", path(&three_d), "--svg", path(&svg)]);
    assert_eq!(code, 2);
    assert!(!svg.exists());

    let (code, _, _) = kdmi(&["cluster", path(&three_d), "--out", "/no/such/dir/out.json"]);
    assert_eq!(code, 2);
    let (code, _, _) = kdmi(&["cluster", path(&three_d), "--solver", "magic"]);
    assert_eq!(code, 2);
    let (code, _, _) = kdmi(&["simulate", "--preset", "nope"]);
    assert_eq!(code, 2);
}

#[test]
fn compute_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Five clusters of 4d points: too many for brute force, no closed form.
    let input = dir.path().join("wide.csv");
    let rows: String = (0..30)
        .map(|i: u32| {
            let x = |j: u32| ((i * 7919 + j * 104729) % 997) as f64 / 997.0;
            format!("{},{},{},{}\n", x(1), x(2), x(3), x(4))
        })
        .collect();
    fs::write(&input, rows).unwrap();
    let (code, _, err) = kdmi(&["cluster", path(&input), "--solver", "exact"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn help_exits_cleanly() {
    let (code, stdout, _) = kdmi(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["cluster", "aggregate", "single", "simulate", "fixtures"] {
        assert!(stdout.contains(sub));
    }
}

#[test]
fn aggregate_with_gold_recovers_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_reports(&example12_world(30), &vec![StrategyMatrix::identity(3); 30], 4).unwrap();
    let reports = dir.path().join("reports.json");
    fs::write(&reports, g.reports.to_json_string()).unwrap();
    let gold = dir.path().join("gold.csv");
    let gold_rows: String = g.truth.iter().enumerate().take(6).map(|(t, c)| format!("{t},{c}\n")).collect();
    fs::write(&gold, format!("task_index,option_index\n{gold_rows}")).unwrap();
    let (code, stdout, err) = kdmi(&["aggregate", path(&reports), "--gold", path(&gold), "--seed", "2"]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let answers: Vec<usize> = serde_json::from_value(v["alignment"]["answers"].clone()).unwrap();
    assert_eq!(answers, g.truth);
    assert_eq!(v["payments"].as_array().unwrap().len(), 30);
    assert!(v["quality"].as_f64().unwrap() > 0.0);
}

#[test]
fn aggregate_rejects_malformed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports.json");
    fs::write(&reports, r#"{"n": 3, "options": 2, "agents": [{"id": "a", "answers": {"7": 0}}]}"#).unwrap();
    let (code, _, err) = kdmi(&["aggregate", path(&reports)]);
    assert_eq!(code, 2);
    assert!(err.contains("/agents/0/answers/7"), "{err}");
}

#[test]
fn single_reports_both_answers() {
    let dir = tempfile::tempdir().unwrap();
    let (d, _) = generate_single_task(&two_world_spectral(), 300, 9).unwrap();
    let input = dir.path().join("single.json");
    fs::write(&input, d.to_json_string()).unwrap();
    let (code, stdout, err) = kdmi(&["single", path(&input)]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["sp_answer"].is_u64());
    assert!(v["sts_label"].is_string());
    assert_eq!(v["sts_degenerate"], false);
}

#[test]
fn simulate_presets_and_reports_out() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("gen.json");
    let (code, stdout, err) =
        kdmi(&["simulate", "--preset", "legal_pure", "--agents", "40", "--expected", "--reports-out", path(&reports)]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["extraction_accuracy"], 1.0);
    assert_eq!(v["invariance"]["identical"], true);
    assert!(kdmi::mechanisms::ReportSet::from_json_str(&fs::read_to_string(&reports).unwrap()).is_ok());

    let (code, stdout, _) = kdmi(&["simulate", "--preset", "two_world_spectral", "--trials", "50"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["sts_accuracy"].as_f64().unwrap() >= 0.95);

    let (code, stdout, _) = kdmi(&["simulate", "--preset", "affine_fixture"]);
    assert_eq!(code, 0);
    assert_eq!(serde_json::from_str::<Value>(&stdout).unwrap()["identical"], true);
}

#[test]
fn simulate_reads_scenario_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    let text = serde_json::to_string(&kdmi::simulator::preset("example12").unwrap()).unwrap();
    fs::write(&scenario, text).unwrap();
    let (code, stdout, err) = kdmi(&["simulate", "--scenario", path(&scenario), "--agents", "300"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(serde_json::from_str::<Value>(&stdout).unwrap()["agents"], 300);
    let (code, _, _) = kdmi(&["simulate", "--scenario", path(&scenario), "--preset", "example12"]);
    assert_eq!(code, 2);
}

#[test]
fn fixtures_are_printed_verbatim() {
    for name in fixtures::FIXTURE_NAMES {
        let (code, stdout, _) = kdmi(&["fixtures", name]);
        assert_eq!(code, 0);
        assert_eq!(stdout, fixtures::fixture_csv(name).unwrap());
    }
}
