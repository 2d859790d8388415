//! End-to-end runs of the `ayang` binary: exit codes and byte-identical output.

use std::path::PathBuf;
use std::process::{Command, Output};

fn ayang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ayang")).args(args).env("AYANG_THREADS", "2").output().expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("not killed by a signal")
}

#[test]
fn json_reports_are_byte_identical() {
    let v1 = data("toy_a2_v1.json");
    let v2 = data("toy_a2_v2.json");
    let synth = data("synthetic_rminus.json");
    let spec = data("resum_example.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["--format", "json", "cartan", "--type", "G2~1"],
        vec!["--format", "json", "formal-r0", "--type", "A2~1", "--order", "4"],
        vec!["--format", "json", "resum", "--spec", &spec],
        vec!["--format", "json", "eval", "--type", "A2~1", "--v1", &v1, "--v2", &v2, "--s", "3,1", "--check", "cabling"],
        vec!["--format", "json", "rminus", "--data", &synth, "--height", "2", "--verify", "intertwiner", "--s", "2,1", "--s", "-1,3"],
    ];
    for args in runs {
        let a = ayang(&args);
        let b = ayang(&args);
        assert_eq!(code(&a), 0, "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
        assert_eq!(v["pass"], true);
        assert!(v.get("wall_time_s").is_none());
    }
}

#[test]
fn timing_is_opt_in() {
    let o = ayang(&["--format", "json", "--timing", "cartan", "--type", "A3~1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["wall_time_s"].is_f64());
}

#[test]
fn exit_codes_classify_failures() {
    assert_eq!(code(&ayang(&["cartan", "--type", "Z9~1"])), 10);
    assert_eq!(code(&ayang(&["rminus", "--data", "/no/such/file.json"])), 3);
    assert_eq!(code(&ayang(&["frobnicate"])), 2);
    assert_eq!(code(&ayang(&["rminus", "--data", &data("sl2_triple.json")])), 2);
    assert_eq!(code(&ayang(&["selftest", "--criterion", "9"])), 2);
    // the C_n rows of the stored table disagree with the computed determinants
    assert_eq!(code(&ayang(&["tables", "--max-rank", "3"])), 1);
    let bad = std::env::temp_dir().join("ayang_cli_bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&ayang(&["resum", "--spec", &bad.display().to_string()])), 4);
}

#[test]
fn missing_root_block_is_reported() {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(data("synthetic_rminus.json")).unwrap()).unwrap();
    // a root listed without its W block
    let support = v["support"].as_array_mut().unwrap();
    let top = support.iter_mut().find(|r| r["alpha"] == serde_json::json!([1, 1])).unwrap();
    top.as_object_mut().unwrap().remove("w");
    let path = std::env::temp_dir().join("ayang_cli_missing.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let p = path.display().to_string();
    assert_eq!(code(&ayang(&["rminus", "--data", &p, "--height", "2"])), 24);
    // below the missing root's height the recursion never needs it
    assert_eq!(code(&ayang(&["rminus", "--data", &p, "--height", "1"])), 0);
}

#[test]
fn cocycle_through_the_binary() {
    let o = ayang(&["--format", "json", "rminus", "--data", &data("sl2_triple.json"), "--height", "3", "--verify", "cocycle", "--s2", "0,0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
