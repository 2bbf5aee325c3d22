//! Acceptance suite: one test per criterion, each printing its pass/fail
//! line. The checks themselves live in `heatbem::suite` so the CLI `verify`
//! subcommand runs the identical code.

use heatbem::suite::{self, CheckResult, SuiteConfig};

fn run(check: impl Fn(&SuiteConfig) -> CheckResult) {
    let cfg = SuiteConfig::default();
    let result = check(&cfg);
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn a01_jump_relations() {
    run(suite::criterion_jump_relations);
}

#[test]
fn a02_caloric_residual() {
    run(suite::criterion_caloric_residual);
}

#[test]
fn a03_manufactured_linear() {
    run(suite::criterion_manufactured_linear);
}

#[test]
fn a04_zero_data() {
    run(suite::criterion_zero_data);
}

#[test]
fn a05_newton_jacobian() {
    run(suite::criterion_newton_jacobian);
}

#[test]
fn a06_bem_vs_fd() {
    run(suite::criterion_bem_vs_fd);
}

#[test]
fn a07_shape_smoothness() {
    run(suite::criterion_shape_smoothness);
}

#[test]
fn a08_local_uniqueness() {
    run(suite::criterion_local_uniqueness);
}

#[test]
fn a09_causality() {
    run(suite::criterion_causality);
}

#[test]
fn a10_ntd_consistency() {
    run(suite::criterion_ntd_consistency);
}
