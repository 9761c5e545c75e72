use std::path::Path;
use std::process::{Command, Output};

use dfrc_harness::experiment::{TrialRecord, TrialStatus};
use dfrc_harness::output::{read_csv, BeampatternRow, ConvergenceRow};

fn dfrc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfrc")).current_dir(dir).args(args).output().expect("spawn dfrc")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_writes_one_record_per_trial_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--scenario", "wide", "--trials", "2", "--seed", "3"];
    ok(&dfrc(dir.path(), &[&args[..], &["--out", "a.csv"]].concat()));
    ok(&dfrc(dir.path(), &[&args[..], &["--out", "b.csv", "--jobs", "2"]].concat()));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with(b"# dfrc-secure-beamformer v1\n"));

    let recs: Vec<TrialRecord> = read_csv(&dir.path().join("a.csv")).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs.iter().map(|r| r.trial_index).collect::<Vec<_>>(), [0, 1]);
    for r in &recs {
        assert_eq!(r.status, TrialStatus::Ok);
        assert_eq!(r.solve_time_ms, 0.0);
        // Secrecy rate from the reported SINRs: the weakest user sets it.
        let (s, e) = (r.min_user_sinr.unwrap(), r.eve_sinr.unwrap());
        let expect = (0.5 * ((1.0 + s).log2() - (1.0 + e).log2())).max(0.0);
        assert!((r.secrecy_rate.unwrap() - expect).abs() < 1e-12);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"][0]["n_trials"], 2);
}

#[test]
fn unwritable_output_fails_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfrc(dir.path(), &["sweep", "--trials", "50", "--out", "missing/dir/r.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot write"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "gamma_c_db = 1.0\n").unwrap();
    assert_eq!(dfrc(dir.path(), &["design", "--config", "c.toml"]).status.code(), Some(2));
    assert_eq!(dfrc(dir.path(), &["design", "--set", "n_trials=0"]).status.code(), Some(2));
    assert_eq!(dfrc(dir.path(), &["design", "--set", "theta0_deg=95"]).status.code(), Some(2));
    assert_eq!(dfrc(dir.path(), &["design", "--scenario", "nope"]).status.code(), Some(2));
}

#[test]
fn all_infeasible_sweep_exits_with_three_and_still_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfrc(dir.path(), &["sweep", "--scenario", "wide", "--trials", "1", "--set", "gamma_b_db=60", "--out", "r.csv"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let recs: Vec<TrialRecord> = read_csv(&dir.path().join("r.csv")).unwrap();
    assert_eq!(recs[0].status, TrialStatus::Infeasible);
    assert!(recs[0].secrecy_rate.is_none());
    let summary = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert!(summary.contains("\"warning\": \"no feasible"));
}

#[test]
fn beampattern_csv_has_a_row_per_degree_and_label() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dfrc(dir.path(), &["beampattern", "--scenarios", "wide", "--benchmark", "--out", "bp.csv"]));
    let text = std::fs::read_to_string(dir.path().join("bp.csv")).unwrap();
    assert!(text.starts_with("# dfrc-secure-beamformer v1\nlabel,theta_deg,gain_db\n"));
    let rows: Vec<BeampatternRow> = read_csv(&dir.path().join("bp.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 181);
    assert_eq!(rows.iter().filter(|r| r.label == "benchmark").count(), 181);
    let wide: Vec<&BeampatternRow> = rows.iter().filter(|r| r.label == "wide").collect();
    assert_eq!(wide.first().unwrap().theta_deg, -90.0);
    // Peak inside the main beam, Δθ = 5° around θ0 = 0.
    let peak = wide.iter().max_by(|a, b| a.gain_db.total_cmp(&b.gain_db)).unwrap();
    assert!(peak.theta_deg.abs() <= 5.0, "peak at {}", peak.theta_deg);
}

#[test]
fn converge_and_design_agree_on_iterations() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dfrc(dir.path(), &["converge", "--scenario", "wide", "--seed", "4", "--out", "c.csv"]));
    ok(&dfrc(dir.path(), &["design", "--scenario", "wide", "--seed", "4", "--out", "d.json"]));
    let rows: Vec<ConvergenceRow> = read_csv(&dir.path().join("c.csv")).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(rows.len() as u64, report["iterations"].as_u64().unwrap());
    assert_eq!(rows.last().unwrap().iteration, rows.len());
    assert!(rows.iter().all(|r| r.y.split(';').count() == 11));
    let obj = report["objective_per_iter"].as_array().unwrap();
    assert_eq!(obj.last().unwrap().as_f64().unwrap(), rows.last().unwrap().objective);
}

#[test]
fn synthesize_writes_the_benchmark_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfrc(dir.path(), &["synthesize", "--set", "theta0_deg=20", "--out", "b.csv"]);
    ok(&out);
    let rows: Vec<BeampatternRow> = read_csv(&dir.path().join("b.csv")).unwrap();
    let peak = rows.iter().max_by(|a, b| a.gain_db.total_cmp(&b.gain_db)).unwrap();
    assert!((peak.theta_deg - 20.0).abs() <= 5.0);
}
