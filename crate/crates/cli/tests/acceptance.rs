//! One test per acceptance criterion. Each prints a single PASS/FAIL line.
//!
//! Runtime budgets are only enforced by `ayang selftest --timing` on a release build; here
//! the timings are left out so the suite does not depend on machine load.

use ayang_cli::selftest::{run_criterion, CriterionReport};
use ayang_core::qcartan::golden;
use ayang_core::{analyze, build_cartan, AffineTypeId};

fn run(id: u32) -> CriterionReport {
    let rep = run_criterion(id, false);
    println!("{}", rep.line());
    rep
}

fn assert_all_pass(rep: &CriterionReport) {
    let failed: Vec<_> = rep.checks.iter().filter(|c| !c.pass).map(|c| (&c.name, &c.detail)).collect();
    assert!(rep.pass && failed.is_empty(), "criterion {} failed: {failed:#?}", rep.id);
}

/// The stored rows for C_n^(1), A_{2l}^(2), A_{2l-1}^(2) and D_{l+1}^(2) disagree with the
/// determinant of the symmetrized matrix, so this criterion reports FAIL. The test pins that
/// state exactly: every other check must pass, every failure must be one of those rows, and
/// for each of them the computed value must equal the independently recomputed closed form.
#[test]
fn criterion_1_determinant_tables() {
    let rep = run(1);
    assert!(!rep.pass, "the conflicting table rows are expected to be reported as FAIL");
    let mut conflicted = Vec::new();
    for c in rep.checks.iter().filter(|c| !c.pass) {
        let id: AffineTypeId = c.name.split_whitespace().next().and_then(|s| s.parse().ok()).unwrap_or_else(|| panic!("unexpected failure {:?}", c.name));
        assert!(golden::known_table_conflict(&id), "unexpected failure {:?} {:?}", c.name, c.detail);
        assert!(c.name.contains("det B(T)") || c.name.contains("q0bar"), "only table comparisons may fail: {:?}", c.name);
        conflicted.push(id);
    }
    conflicted.dedup();
    assert!(!conflicted.is_empty());
    for id in conflicted {
        let r = analyze(&build_cartan(id).unwrap());
        let (p, q) = golden::derived_det(&id).expect("every conflicting row has a recomputed closed form");
        assert_eq!((p, q), (r.det_bt, r.qdzero), "{id}");
    }
}

#[test]
fn criterion_2_czero() {
    assert_all_pass(&run(2));
}

#[test]
fn criterion_3_mu_zeta_gamma() {
    assert_all_pass(&run(3));
}

#[test]
fn criterion_4_formal_abelian_r() {
    assert_all_pass(&run(4));
}

#[test]
fn criterion_5_resummation() {
    assert_all_pass(&run(5));
}

#[test]
fn criterion_6_category_o_evaluation() {
    assert_all_pass(&run(6));
}

#[test]
fn criterion_7_lower_triangular_r() {
    assert_all_pass(&run(7));
}
