use std::path::{Path, PathBuf};
use std::process::Command;

use mars_core::cli::{PlanReport, SimReport};
use mars_core::CmSummary;

fn mars() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mars"));
    c.env_remove("MARS_PARAMS").env("RUST_LOG", "off");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], input: &Path, output: &Path) -> i32 {
    let out = mars().args(args).arg("--input").arg(input).arg("--output").arg(output).output().unwrap();
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn analyze_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    assert_eq!(run(&["analyze"], &config("3x2_unit3_failed.json"), &out), 0);
    let s: CmSummary = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(s.controllable && (s.cm - 1.5994).abs() < 1e-4);

    assert_eq!(run(&["analyze"], &config("3x2_units1_4_failed.json"), &out), 2);
    let s: CmSummary = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!s.controllable && s.cm < 0.0);
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    assert_eq!(run(&["analyze"], &dir.path().join("missing.json"), &out), 1);
    let broken = write(dir.path(), "broken.json", "{\"units\": [");
    assert_eq!(run(&["analyze"], &broken, &out), 1);
    let unknown = write(dir.path(), "unknown.json", r#"{"units": [{"id": 1, "cell": [0, 0]}], "colour": 3}"#);
    assert_eq!(run(&["analyze"], &unknown, &out), 1);
    let apart = write(dir.path(), "apart.json", r#"{"units": [{"id": 1, "cell": [0, 0]}, {"id": 2, "cell": [2, 0]}]}"#);
    assert_eq!(run(&["analyze"], &apart, &out), 1);
    assert_eq!(mars().arg("frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(mars().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn bad_parameter_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", r#"{"pitch": -1}"#);
    let out = mars()
        .env("MARS_PARAMS", &params)
        .args(["analyze", "--input"])
        .arg(config("3x2_intact.json"))
        .arg("--output")
        .arg(dir.path().join("o.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plan_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.json");
    assert_eq!(run(&["plan", "--mode", "full"], &config("3x3_unit8_failed.json"), &out), 0);
    let r: PlanReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.plan.step_count, 6);
    assert!(r.plan.min_intermediate_cm > 0.0);
    let trace = std::fs::read_to_string(dir.path().join("plan.trace.csv")).unwrap();
    assert!(trace.starts_with("step,structure_id,cm\n0,0,"));

    let line = write(
        dir.path(),
        "line.json",
        r#"{"units": [{"id": 1, "cell": [0, 0], "eta": [0, 0, 0, 0]}, {"id": 2, "cell": [1, 0]}, {"id": 3, "cell": [2, 0]}]}"#,
    );
    assert_eq!(run(&["plan"], &line, &out), 3);
    assert_eq!(run(&["plan"], &config("3x2_intact.json"), &out), 1);
}

#[test]
fn outputs_are_reproducible_and_use_lf() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 3] = [
        (&["plan"], "3x2_unit3_failed.json"),
        (&["sweep"], "sweep_3x2_single_unit.json"),
        (&["simulate", "--repeat", "2"], "simulate_3x2_unit3_faulty_ftc.json"),
    ];
    for (args, input) in cases {
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        assert_eq!(run(args, &config(input), &a), 0);
        assert_eq!(run(args, &config(input), &b), 0);
        let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(ta, tb, "{input}");
        assert!(!ta.contains(&b'\r'));
    }
}

#[test]
fn sweep_matches_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pairs.csv");
    assert_eq!(run(&["sweep"], &config("sweep_3x2_unit_pairs.json"), &out), 0);
    let got = std::fs::read_to_string(&out).unwrap();
    let want = include_str!("golden/sweep_3x2_unit_pairs.csv");
    let (got, want): (Vec<_>, Vec<_>) = (got.lines().collect(), want.lines().collect());
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        let (g, w): (Vec<_>, Vec<_>) = (g.split(',').collect(), w.split(',').collect());
        assert_eq!(g.len(), w.len());
        for (i, (x, y)) in g.iter().zip(w).enumerate() {
            match (i, x.parse::<f64>(), y.parse::<f64>()) {
                (3, Ok(x), Ok(y)) => assert!((x - y).abs() < 1e-9, "{x} vs {y}"),
                _ => assert_eq!(x, &y),
            }
        }
    }
}

#[test]
fn simulate_writes_report_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let code = mars()
        .args(["simulate", "--repeat", "3", "--seed", "7", "--input"])
        .arg(config("simulate_3x2_unit3_reconfigured_ftc.json"))
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(0));
    let r: SimReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.runs.iter().map(|x| x.seed).collect::<Vec<_>>(), vec![7, 8, 9]);
    assert_eq!(r.crashed_runs, 0);
    let runs = std::fs::read_to_string(dir.path().join("sim.runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 4);
    let trace = std::fs::read_to_string(dir.path().join("sim.trace.csv")).unwrap();
    assert!(trace.starts_with("t,p_z,phi,theta,psi,v_z,w_x,w_y,w_z\n"));
}
