use std::path::Path;
use std::process::{Command, Output};

use spcap::instance::fixtures::tiny1;
use spcap::instance::save_instance;
use spcap::report::RunReport;

fn spcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spcap"))
        .args(args)
        .env_remove("SPCAP_THREADS")
        .output()
        .expect("binary runs")
}

fn write_tiny1(dir: &Path) -> String {
    let path = dir.join("tiny1.txt");
    std::fs::write(&path, save_instance(&tiny1())).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn oracle_prints_objective_ten() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_tiny1(dir.path());
    let out = spcap(&["solve", &inst, "--mode", "oracle"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("ID"));
    assert!(text.contains("10.0000"), "{text}");
}

#[test]
fn hybrid_with_a_seed_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_tiny1(dir.path());
    let args = ["solve", &inst, "--mode", "hybrid", "--seed", "7", "--out", "csv", "--deterministic"];
    let a = spcap(&args);
    let b = spcap(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let report = RunReport::read_csv(a.stdout.as_slice()).unwrap();
    let row = &report.rows[0];
    assert_eq!(row.objective, 10.0);
    assert!(row.objective <= row.pi_bound.unwrap() + 1e-6);
}

#[test]
fn threads_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let p = path.to_str().unwrap();
    assert!(spcap(&["generate", "--terminals", "6", "--bases", "4", "--levels", "2", "--seed", "3", "--out", p])
        .status
        .success());
    let args = ["solve", p, "--loops", "3", "--seed", "5", "--out", "csv", "--deterministic"];
    let one = spcap(&args);
    let two = Command::new(env!("CARGO_BIN_EXE_spcap"))
        .args(args)
        .env("SPCAP_THREADS", "2")
        .output()
        .unwrap();
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_spcap"))
        .args(args)
        .env("SPCAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_tiny1(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# hybrid settings\nmode = oracle\nout = csv\nloops = 2\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = spcap(&["solve", &inst, "--config", cfg, "--deterministic"]);
    assert!(out.status.success());
    let report = RunReport::read_csv(out.stdout.as_slice()).unwrap();
    // Oracle rows carry no ant coverage.
    assert_eq!(report.rows[0].served_aco, None);
    let out = spcap(&["solve", &inst, "--config", cfg, "--mode", "hybrid", "--deterministic"]);
    let report = RunReport::read_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(report.rows[0].served_aco, Some(1));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "speed = 11\n").unwrap();
    assert_eq!(spcap(&["solve", &inst, "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_tiny1(dir.path());
    assert_eq!(spcap(&[]).status.code(), Some(1));
    assert_eq!(spcap(&["solve", &inst, "--mode", "quantum"]).status.code(), Some(1));
    assert_eq!(spcap(&["solve", &inst, "--epsilon", "0.7"]).status.code(), Some(1));
    assert_eq!(spcap(&["solve", "/no/such/file"]).status.code(), Some(2));
    let garbage = dir.path().join("garbage.txt");
    std::fs::write(&garbage, "not an instance\n").unwrap();
    assert_eq!(spcap(&["bounds", garbage.to_str().unwrap()]).status.code(), Some(2));
    // 5^9 power vectors exceed the oracle's enumeration cap.
    let big = dir.path().join("big.txt");
    assert!(spcap(&["generate", "--terminals", "3", "--bases", "9", "--levels", "4", "--out", big.to_str().unwrap()])
        .status
        .success());
    let out = spcap(&["solve", big.to_str().unwrap(), "--mode", "oracle"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn generate_bounds_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.cfg");
    std::fs::write(&cfg, "terminals = 5\nbases = 3\nlevels = 2\nseed = 12\narea_side = 400\n").unwrap();
    let inst = dir.path().join("g12.txt");
    let inst_s = inst.to_str().unwrap();
    assert!(spcap(&["generate", "--config", cfg.to_str().unwrap(), "--out", inst_s]).status.success());

    let bounds = spcap(&["bounds", inst_s, "--out", "csv"]);
    assert!(bounds.status.success());
    let text = String::from_utf8(bounds.stdout).unwrap();
    assert!(text.starts_with("ID,PI-bound,PI cuts,PI rounds,BM-bound\ng12,"), "{text}");

    let mut files = Vec::new();
    for mode in ["oracle", "exact"] {
        let out = spcap(&["solve", inst_s, "--mode", mode, "--out", "csv", "--id", mode, "--deterministic"]);
        assert!(out.status.success());
        let path = dir.path().join(format!("{mode}.csv"));
        std::fs::write(&path, &out.stdout).unwrap();
        files.push(path.to_string_lossy().into_owned());
    }
    let merged = spcap(&["report", &files[0], &files[1], "--out", "csv"]);
    let report = RunReport::read_csv(merged.stdout.as_slice()).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!((report.rows[0].objective - report.rows[1].objective).abs() < 1e-6);
    let table = spcap(&["report", &files[0], &files[1]]);
    assert_eq!(String::from_utf8(table.stdout).unwrap().lines().count(), 4);
}

#[test]
fn solution_and_log_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_tiny1(dir.path());
    let sol = dir.path().join("sol.txt");
    let log = dir.path().join("log.csv");
    let out = spcap(&[
        "solve",
        &inst,
        "--loops",
        "2",
        "--solution",
        sol.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
        "--deterministic",
    ]);
    assert!(out.status.success());
    let (parsed, obj) = spcap::formulation::load_solution(&tiny1(), &std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(obj, Some(10.0));
    assert!(spcap::formulation::check_feasibility(&tiny1(), &parsed).is_feasible());
    let rows = spcap::aco::read_run_log(std::fs::File::open(&log).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.elapsed_seconds == 0.0));
}
