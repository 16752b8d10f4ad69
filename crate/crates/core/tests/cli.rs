//! Runs the `odma-ura` binary end to end.

use std::fs;
use std::process::Command;

use tempfile::tempdir;

const BIN: &str = env!("CARGO_BIN_EXE_odma-ura");
const HEADER: &str =
    "ka,m,pp,pd,ebn0_db,trials,pmd,pfa,pe,mean_iterations,mean_mse,collision_rate,wall_clock_per_trial_s";

fn small_args() -> Vec<&'static str> {
    vec![
        "--preset",
        "small",
        "--ka",
        "2",
        "--m",
        "4",
        "--trials",
        "3",
        "--threads",
        "1",
    ]
}

#[test]
fn single_point_writes_csv_sidecar_and_trace() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("point.csv");
    let trace = dir.path().join("trace.jsonl");
    let status = Command::new(BIN)
        .args(small_args())
        .args(["--ebn0", "-1.5", "--rho", "0.3"])
        .arg("--out")
        .arg(&out)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );

    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..2], ["2", "4"]);
    assert!((row[4].parse::<f64>().unwrap() + 1.5).abs() < 1e-9);
    assert_eq!(row[5], "3");
    assert!(lines.next().is_none());

    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("point.csv.json")).unwrap())
            .unwrap();
    assert_eq!(side["plan"]["trials"], 3);
    assert!(side["search"].is_null());

    let trace = fs::read_to_string(&trace).unwrap();
    assert!(trace.lines().count() >= 3);
    for line in trace.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["trial"].is_u64());
    }
}

#[test]
fn search_reports_required_energy() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("search.csv");
    let res = Command::new(BIN)
        .args(small_args())
        .args(["--sweep", "ebn0=4,8;rho=0.3", "--bisect", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("ka=2 m=4"), "{stdout}");
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("search.csv.json")).unwrap())
            .unwrap();
    assert_eq!(side["search"].as_array().unwrap().len(), 1);
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let res = Command::new(BIN)
        .args(small_args())
        .args(["--pp", "1", "--pd", "1"])
        .output()
        .unwrap();
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.lines().next(), Some(HEADER));
    assert_eq!(stdout.lines().count(), 2);
}

#[test]
fn invalid_config_exits_with_error() {
    let res = Command::new(BIN)
        .args(small_args())
        .args(["--ka", "0"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}

#[test]
fn unreadable_config_file_exits_with_error() {
    let dir = tempdir().unwrap();
    let res = Command::new(BIN)
        .arg("--config")
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn rho_axis_requires_ebn0_axis() {
    let res = Command::new(BIN)
        .args(small_args())
        .args(["--sweep", "rho=0.3"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_through_dump() {
    let dir = tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = odma_ura::SystemConfig::small(2, 2);
    fs::write(&cfg_path, cfg.to_json()).unwrap();
    let books = dir.path().join("books.json");
    let res = Command::new(BIN)
        .arg("--config")
        .arg(&cfg_path)
        .args(["--trials", "1", "--threads", "1", "--dump-codebooks"])
        .arg(&books)
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(fs::metadata(&books).unwrap().len() > 0);
}
