use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vaxstab::dynamics::Trajectory;
use vaxstab::ingest::{bubar_from_rows, read_instance, read_rows, AllocationRow, BubarRow, SummaryRow, SweepRow};
use vaxstab::model::effective_reproduction_number;

fn vaxstab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaxstab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = vaxstab(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn rows<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Vec<T> {
    read_rows(fs::File::open(path).unwrap()).unwrap()
}

fn printed_rt(stdout: &str) -> f64 {
    stdout.lines().find_map(|l| l.strip_prefix("calibrated Rt = ")).unwrap().trim().parse().unwrap()
}

#[test]
fn calibrate_hits_target_and_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    let rt = printed_rt(&ok(d.path(), &["calibrate", "--seed", "11", "--target", "1.0697"]));
    assert!((rt - 1.0697).abs() < 1e-4);
    let first = read_instance(&d.path().join("out/instance.json")).unwrap();

    let cfg = r#"{"source": {"instance": {"path": "out/instance.json"}}, "target_rt": 1.0697, "out": "again"}"#;
    fs::write(d.path().join("rerun.json"), cfg).unwrap();
    ok(d.path(), &["calibrate", "--config", "rerun.json"]);
    let second = read_instance(&d.path().join("again/instance.json")).unwrap();
    let (a, b) = (effective_reproduction_number(&first).unwrap(), effective_reproduction_number(&second).unwrap());
    assert!((a - b).abs() < 1e-8);
}

#[test]
fn calibrate_to_zero_silences_transmission() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(printed_rt(&ok(d.path(), &["calibrate", "--seed", "1", "--target", "0"])), 0.0);
    let inst = read_instance(&d.path().join("out/instance.json")).unwrap();
    assert_eq!(inst.params.transmission_scale(), 0.0);
}

#[test]
fn zero_budget_allocates_nothing_and_reports_raw_rate() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["allocate", "--seed", "4", "--budget", "0"]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/allocation.json")).unwrap()).unwrap();
    assert_eq!(report["total_doses"].as_f64().unwrap(), 0.0);
    let (alpha, lmax) = (report["alpha"].as_f64().unwrap(), report["lambda_max"].as_f64().unwrap());
    assert!((alpha + lmax).abs() < 1e-9);
    let table: Vec<AllocationRow> = rows(&d.path().join("out/allocation.csv"));
    assert_eq!(table.len(), 5);
    assert!(table.iter().all(|r| r.v == 0.0 && r.doses == 0.0));
}

#[test]
fn two_node_case_four_allocation() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.json"), r#"{"source": {"fixture": {"name": "two-node-4"}}, "target_rt": 1.0697}"#).unwrap();
    ok(d.path(), &["allocate", "--config", "c.json", "--budget", "0.1"]);
    let table: Vec<AllocationRow> = rows(&d.path().join("out/allocation.csv"));
    assert!((table[0].v - 0.0923).abs() < 0.01, "{}", table[0].v);
    assert!((table[1].v - 0.8744).abs() < 0.01, "{}", table[1].v);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(vaxstab(d.path(), &["allocate", "--seed", "4", "--alpha", "5"]).status.code(), Some(2));
    fs::write(d.path().join("bad.json"), r#"{"horizon": 0}"#).unwrap();
    assert_eq!(vaxstab(d.path(), &["simulate", "--config", "bad.json"]).status.code(), Some(3));
    assert_eq!(vaxstab(d.path(), &["simulate", "--config", "missing.json"]).status.code(), Some(3));
    assert_eq!(vaxstab(d.path(), &["simulate", "--policy", "nonsense"]).status.code(), Some(3));
    assert_eq!(vaxstab(d.path(), &["frobnicate"]).status.code(), Some(3));
    assert_eq!(vaxstab(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn subcritical_no_vaccine_cases_decay() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["simulate", "--seed", "5", "--target", "0.8", "--policy", "no-vaccine", "--horizon", "120"]);
    let t = Trajectory::read_csv(fs::File::open(d.path().join("out/trajectory-no-vaccine.csv")).unwrap()).unwrap();
    let daily: Vec<f64> = t.new_cases.iter().map(|row| row.iter().sum()).collect();
    assert!(daily[1] > 0.0);
    assert!(daily.windows(2).skip(1).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn compare_is_deterministic_and_tables_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let args = ["compare", "--seed", "9", "--horizon", "200"];
    ok(d.path(), &args);
    let first = fs::read(d.path().join("out/summary.csv")).unwrap();
    let opt = fs::read(d.path().join("out/trajectory-optimal.csv")).unwrap();
    ok(d.path(), &args);
    assert_eq!(first, fs::read(d.path().join("out/summary.csv")).unwrap());
    assert_eq!(opt, fs::read(d.path().join("out/trajectory-optimal.csv")).unwrap());

    let summary: Vec<SummaryRow> = rows(&d.path().join("out/summary.csv"));
    assert_eq!(summary.len(), 4);
    let t = Trajectory::read_csv(opt.as_slice()).unwrap();
    assert!((t.final_cases() - summary[0].final_cases).abs() <= 1e-6 * summary[0].final_cases);
    for r in &summary[1..] {
        assert!(summary[0].final_cases <= r.final_cases && summary[0].final_deaths <= r.final_deaths, "{r:?}");
    }
}

#[test]
fn age_structured_compare() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["compare", "--model", "bubar", "--target", "1.15", "--budget", "0.2"]);
    let summary: Vec<SummaryRow> = rows(&d.path().join("out/summary.csv"));
    assert_eq!(summary.len(), 6);
    assert_eq!(summary[0].policy, "optimal-daily");
    assert!(summary[1..].iter().all(|r| summary[0].final_cases < r.final_cases));
    let traj: Vec<BubarRow> = rows(&d.path().join("out/trajectory-optimal-daily.csv"));
    let traj = bubar_from_rows(&traj).unwrap();
    assert!((traj.final_infections() - summary[0].final_cases).abs() <= 1e-6 * summary[0].final_cases);
}

fn sweep(dir: &Path, axis: &str, range: &str, policies: &[&str]) -> Vec<SweepRow> {
    let mut args = vec!["sweep", "--seed", "2", "--horizon", "300", "--axis", axis, "--range", range];
    for p in policies {
        args.extend(["--policy", p]);
    }
    ok(dir, &args);
    rows(&dir.join("out/sweep.csv"))
}

#[test]
fn budget_sweep_is_monotone() {
    let d = tempfile::tempdir().unwrap();
    let r = sweep(d.path(), "budget", "0.01:0.5:8", &["optimal-daily"]);
    assert_eq!(r.len(), 8);
    assert!(r.windows(2).all(|w| w[1].final_cases <= w[0].final_cases + 1e-6));
    assert_eq!(fs::read_dir(d.path().join("out/sweep-points")).unwrap().count(), 8);
}

#[test]
fn longer_supply_intervals_front_load() {
    let d = tempfile::tempdir().unwrap();
    let r = sweep(d.path(), "interval", "1,2,4,8,16", &["optimal"]);
    assert!(r.windows(2).all(|w| w[1].final_cases <= w[0].final_cases + 1e-6));
}

#[test]
fn optimal_dominates_across_rt() {
    let d = tempfile::tempdir().unwrap();
    let r = sweep(d.path(), "rt", "0.95:2.0:5", &[]);
    for point in r.chunks(4) {
        assert_eq!(point[0].policy, "optimal");
        for other in &point[1..] {
            assert!(point[0].final_cases <= other.final_cases, "{other:?}");
        }
    }
}
