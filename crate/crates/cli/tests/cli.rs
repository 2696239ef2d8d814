use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use weakmean::matching::{self, CostMatrix, Matching};
use weakmean::rational::{int, Rational};
use weakmean::systems::SystemDescriptor;
use weakmean_cli::config::{ExperimentConfig, VerifyLevel};
use weakmean_cli::verify::{run_check, run_verify_with, AssignmentSolver, Budget, Check};
use weakmean_cli::{tasks, CliError};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weakmean"))
}

fn write_config(dir: &Path, v: &Value) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn circle(num: &str, den: &str) -> Value {
    json!({"kind": "circle", "num": num, "den": den})
}

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"system\": {\"kind\": \"doubling\"},\n \"task\": ").unwrap();
    let out = run(&["metric", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_field_and_task_mismatch_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &json!({"system": {"kind": "doubling"}, "task": "density", "colour": 1}));
    assert_eq!(run(&["density", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    let p = write_config(dir.path(), &json!({"system": {"kind": "doubling"}, "task": "density"}));
    assert_eq!(run(&["metric", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unknown_probe_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        &json!({"system": {"kind": "doubling"}, "task": "dichotomy", "probe": {"sampleCount": 3}}),
    );
    assert_eq!(run(&["dichotomy", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn metric_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "system": {"kind": "rotation", "angle": "1/2"},
        "task": "metric",
        "pairs": [{"id": "p0", "x": circle("0", "1"), "y": circle("1", "4")}],
        "stats": [{"kind": "weakMean"}],
    });
    let p = write_config(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "metric", "--config", p.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
        "--format", "both", "--schedule", "2..4", "--threads", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let record: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("result.json")).unwrap()).unwrap();
    assert_eq!(record["schemaVersion"], 1);
    assert_eq!(record["provenance"]["schedule"], json!([4, 8, 16]));
    let csv = std::fs::read_to_string(out_dir.join("table.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "pairId,statKind,n,num,den,approx");
    assert_eq!(lines[1..], ["p0,weakMean,4,1,4,0.25", "p0,weakMean,8,1,4,0.25", "p0,weakMean,16,1,4,0.25"]);
}

#[test]
fn binary_payloads_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "system": {"kind": "doubling"},
        "task": "metric",
        "seed": 9,
        "pairs": [{"id": "p0", "x": {"typical": 1}, "y": {"sample": {"type": "randomStream"}, "seed": 2}}],
        "stats": [{"kind": "weakMean"}, {"kind": "supPerm"}],
    });
    let p = write_config(dir.path(), &cfg);
    let payload = || {
        let out = run(&["metric", "--config", p.to_str().unwrap(), "--schedule", "4..9"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        (serde_json::to_vec(&v["payload"]).unwrap(), v["payloadHash"].clone())
    };
    assert_eq!(payload(), payload());
}

#[test]
fn verify_quick_exits_0() {
    let out = run(&["verify", "--level", "quick", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 1 + Check::ALL.len());
}

/// Reports one unit less than the true optimum whenever it is positive.
struct OffByOne;

impl AssignmentSolver for OffByOne {
    fn min_assignment(&self, c: &CostMatrix) -> weakmean::Result<Matching> {
        let mut m = matching::solve_min_assignment(c)?;
        if m.total_cost > Rational::from_integer(0.into()) {
            m.total_cost -= int(1);
        }
        Ok(m)
    }
    fn max_assignment(&self, c: &CostMatrix) -> weakmean::Result<Matching> {
        matching::solve_max_assignment(c)
    }
    fn min_exceedance(&self, c: &CostMatrix, t: &Rational) -> weakmean::Result<usize> {
        matching::min_exceedance_count(c, t)
    }
}

#[test]
fn faulty_solver_fails_verify_naming_the_check() {
    let report = run_verify_with(VerifyLevel::Quick, 0, &OffByOne);
    assert!(!report.passed);
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.iter().any(|c| c.check == Check::SolverOracle));
    let oracle = failed.iter().find(|c| c.check == Check::SolverOracle).unwrap();
    assert!(oracle.failure.as_deref().unwrap().contains("min"), "{:?}", oracle.failure);
    let budget = Budget::for_level(VerifyLevel::Quick);
    assert!(run_check(Check::JointVisitClosedForm, &budget, 0, &OffByOne).passed);
}

#[test]
fn zero_budget_probe_is_inconclusive_not_an_error() {
    let cfg = ExperimentConfig::from_json(
        &json!({
            "system": {"kind": "doubling"},
            "task": "probe",
            "point": {"typical": 0},
            "probe": {"samplesPerBall": 0},
        })
        .to_string(),
    )
    .unwrap();
    let out = tasks::run(&cfg).unwrap();
    assert_eq!(out.record.payload["verdict"], "inconclusive");
    assert!(!out.record.payload["notes"].as_array().unwrap().is_empty());
}

#[test]
fn empty_sweep_has_empty_payload() {
    let cfg = ExperimentConfig::from_json(
        &json!({"system": {"kind": "doubling"}, "task": "sweep", "sweep": {"systems": [], "rotationConvergents": 0}})
            .to_string(),
    )
    .unwrap();
    let out = tasks::run(&cfg).unwrap();
    assert_eq!(out.record.payload["rows"], json!([]));
    assert!(out.rows.is_empty());
}

#[test]
fn sweep_over_rotations_is_equicontinuous_side() {
    let cfg = ExperimentConfig::from_json(
        &json!({
            "system": {"kind": "doubling"},
            "task": "sweep",
            "sweep": {"systems": [], "rotationConvergents": 3},
            "probe": {"schedule": [16, 32, 64, 128, 256], "centers": 2, "samplesPerBall": 4},
        })
        .to_string(),
    )
    .unwrap();
    let out = tasks::run(&cfg).unwrap();
    let rows = out.record.payload["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["side"] == "equicontinuousSide"), "{rows:?}");
}

#[test]
fn density_task_reports_block_densities() {
    let cfg = ExperimentConfig::from_json(
        &json!({"system": SystemDescriptor::doubling(), "task": "density", "density": {"type": "powerBlocks", "base": 4, "maxExp": 6}})
            .to_string(),
    )
    .unwrap();
    let out = tasks::run(&cfg).unwrap();
    let upper = &out.record.payload["upperDensity"];
    assert_eq!((upper["num"].as_str(), upper["den"].as_str()), (Some("5461"), Some("8192")));
}

#[test]
fn invariant_violation_maps_to_exit_3() {
    let e = CliError::Core(weakmean::Error::InvariantViolation("x".into()));
    assert_eq!(e.exit_code(), 3);
    assert_eq!(CliError::Config("x".into()).exit_code(), 2);
}
