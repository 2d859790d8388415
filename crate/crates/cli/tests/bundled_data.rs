//! The JSON files under `data/` are the serialized forms of the in-code constructors.
//! Set `AYANG_REGEN_DATA=1` to rewrite them after changing a constructor.

use std::path::PathBuf;

use ayang_core::cato::toy_a2_modules;
use ayang_core::rminus::{sl2_triple, synthetic_instance, OperatorDataSpec, TripleDataSpec};
use num_complex::Complex64 as C64;
use serde_json::Value;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn check(name: &str, expected: Value) {
    let path = data_dir().join(name);
    if std::env::var_os("AYANG_REGEN_DATA").is_some() {
        std::fs::write(&path, serde_json::to_string(&expected).unwrap() + "\n").unwrap();
    }
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(stored, expected, "{name} is stale; rerun with AYANG_REGEN_DATA=1");
}

#[test]
fn bundled_files_match_constructors() {
    let c = |re, im| C64::new(re, im);
    check("synthetic_rminus.json", serde_json::to_value(OperatorDataSpec::from(&synthetic_instance())).unwrap());
    let triple = sl2_triple(c(1.0, 0.0), [c(0.3, 0.0), c(-0.5, 0.2), c(0.1, -0.4)]);
    check("sl2_triple.json", serde_json::to_value(TripleDataSpec::from(&triple)).unwrap());
    let (v1, v2) = toy_a2_modules(c(1.0, 0.0));
    check("toy_a2_v1.json", serde_json::to_value(&v1).unwrap());
    check("toy_a2_v2.json", serde_json::to_value(&v2).unwrap());
}
