use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use raptor_lite::profiler;
use raptor_lite::Mode;

fn raptor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raptor-lite")).args(args).env_remove("RAPTOR_LITE_TRUNCATE").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn sweep_is_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "s.csv");
    let o = raptor(&[
        "sweep", "--workload", "sod", "--mode", "op", "--spec-template", "64_to_11_M", "--mantissas", "4,8,12,23,52",
        "--cutoffs", "0,1,2", "--cells", "60", "--t-end", "0.05", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = profiler::import_report(Path::new(&out)).unwrap();
    assert_eq!(recs.len(), 15);
    let pairs: Vec<(u32, u32)> = recs.iter().map(|r| (r.mantissa_bits, r.cutoff_l)).collect();
    assert_eq!(pairs[..4], [(4, 0), (4, 1), (4, 2), (8, 0)]);
    assert!(recs.iter().all(|r| r.workload == "sod" && r.exp_bits == 11));
}

#[test]
fn identical_flags_give_identical_bytes() {
    let args = ["sweep", "--workload", "stencil", "--mantissas", "5,10", "--cutoffs", "0,2", "--seed", "11"];
    let a = raptor(&args);
    let b = raptor(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = raptor(&["sweep", "--workload", "stencil", "--mantissas", "5,10", "--cutoffs", "0,2", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn oversized_mantissa_is_a_usage_error() {
    let o = raptor(&["sweep", "--workload", "stencil", "--mantissas", "300"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("--mantissas") && err.contains("256"), "{err}");
}

#[test]
fn bad_flags_are_named() {
    let o = raptor(&["sweep", "--workload", "stencil", "--exclude", "hydro"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--exclude"));
    let o = raptor(&["sweep", "--workload", "plasma"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--workload"));
    let o = raptor(&["sweep", "--spec", "64_to_5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--spec"));
}

#[test]
fn environment_overrides_spec_flag() {
    let o = Command::new(env!("CARGO_BIN_EXE_raptor-lite"))
        .args(["sweep", "--workload", "stencil", "--spec", "64_to_11_30"])
        .env("RAPTOR_LITE_TRUNCATE", "64_to_5_7")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = profiler::from_csv(&stdout(&o)).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].spec, "64_to_5_7");
}

#[test]
fn config_file_sets_workload_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "sod.toml");
    fs::write(&cfg, "cells = 80\nt_end = 0.05\ncfl = 0.5\nfixed_dt = true\nlevels = 2\n").unwrap();
    let o = raptor(&["sweep", "--config", &cfg, "--mantissas", "10", "--cutoffs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = profiler::from_csv(&stdout(&o)).unwrap();
    // cutoff equal to the level count truncates nothing
    assert_eq!(recs[0].truncated_flops, 0);
    assert_eq!(recs[0].l1_error, 0.0);

    fs::write(&cfg, "steps = 3\n").unwrap();
    let o = raptor(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("steps"));
}

#[test]
fn nonconvergence_is_a_completed_run() {
    let o = raptor(&["sweep", "--workload", "eos", "--mantissas", "4,52"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("eos,op,64_to_11_4,") && l.contains(",inf,")), "{text}");
    let recs = profiler::from_csv(&text).unwrap();
    assert_eq!(recs[1].l1_error, 0.0);
}

#[test]
fn codesign_appends_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "r.csv");
    let o = raptor(&["sweep", "--workload", "stencil", "--mantissas", "23,52", "--out", &report]);
    assert!(o.status.success());
    let o = raptor(&["codesign", "--report", &report]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("memory-bound"));
    let recs = profiler::import_report(Path::new(&report)).unwrap();
    let e23 = recs[0].estimate.as_ref().unwrap();
    let e52 = recs[1].estimate.as_ref().unwrap();
    assert_eq!((e52.speedup_compute, e52.speedup_memory), (1.0, 1.0));
    // every byte truncated to the 35-bit (11, 23) format
    assert!((e23.speedup_memory - 64.0 / 35.0).abs() < 1e-12);
    assert!(e23.speedup_compute > 1.0);

    let slow = path(dir.path(), "slow.csv");
    let o = raptor(&["codesign", "--report", &report, "--bandwidth", "1", "--out", &slow]);
    assert!(o.status.success());
    assert_eq!(profiler::import_report(Path::new(&slow)).unwrap().len(), 2);
}

#[test]
fn codesign_requires_counter_columns() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "bad.csv");
    fs::write(&report, "workload,mode,spec,cutoff_l\nsod,op,64_to_11_4,0\n").unwrap();
    let o = raptor(&["codesign", "--report", &report]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("schema") && err.contains("missing column"), "{err}");
}

#[test]
fn flags_lists_mem_mode_locations() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "m.json");
    let o = raptor(&["sweep", "--workload", "stencil", "--mode", "mem", "--mantissas", "8", "--threshold", "1e-3", "--out", &report]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = profiler::import_report(Path::new(&report)).unwrap();
    assert_eq!(recs[0].mode, Mode::Mem);
    assert!(recs[0].flags_total > 0);
    let o = raptor(&["flags", "--report", &report]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("location"));
    assert_eq!(lines.len(), 1 + recs[0].flags.len());
    assert!(lines[1].contains("stencil.rs:"));
}

#[test]
fn flags_without_entries_says_so() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "quiet.json");
    let o = raptor(&["sweep", "--workload", "stencil", "--mode", "mem", "--mantissas", "52", "--threshold", "inf", "--out", &report]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = raptor(&["flags", "--report", &report]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "no flagged locations\n");
}

#[test]
fn flags_rejects_op_mode_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "op.json");
    assert!(raptor(&["sweep", "--workload", "stencil", "--mantissas", "8", "--out", &report]).status.success());
    let o = raptor(&["flags", "--report", &report]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mode mismatch"));
}

#[test]
fn flags_orders_ties_by_location() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "ties.json");
    let text = r#"{
  "schema_version": 1,
  "l1_formula": "x",
  "records": [{
    "workload": "sod", "mode": "mem", "spec": "64_to_5_10", "cutoff_l": 0,
    "mantissa_bits": 10, "exp_bits": 5, "l1_error": 0.5,
    "truncated_flops": 1, "full_flops": 0, "truncated_bytes": 0, "full_bytes": 0,
    "flags_total": 7, "wall_seconds": null,
    "flags": [
      {"location": "b.rs:2", "count": 2, "max_deviation": 0.5, "first_seen": 0},
      {"location": "c.rs:9", "count": 3, "max_deviation": 0.25, "first_seen": 1},
      {"location": "a.rs:7", "count": 2, "max_deviation": 0.125, "first_seen": 2}
    ]
  }]
}"#;
    fs::write(&report, text).unwrap();
    let o = raptor(&["flags", "--report", &report]);
    assert!(o.status.success(), "{}", stderr(&o));
    let order: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split_whitespace().next().unwrap().to_string()).collect();
    assert_eq!(order, ["c.rs:9", "a.rs:7", "b.rs:2"]);
}

#[test]
fn selftest_passes_on_tiny_formats() {
    let o = raptor(&["selftest", "--max-exp", "3", "--max-man", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(" 0 mismatches"));
}
