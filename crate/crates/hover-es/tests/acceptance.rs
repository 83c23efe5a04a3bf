//! Acceptance suite: runs the consolidated verification driver once and
//! asserts each criterion, printing one line per criterion cell.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every cell.

use hover_es::reproduce::{evaluate, ReproduceOptions, SummaryReport};
use std::sync::OnceLock;

fn report() -> &'static SummaryReport {
    static REPORT: OnceLock<SummaryReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        evaluate(&ReproduceOptions {
            duration_periods: 1000,
            jobs: 1,
        })
    })
}

fn check(id: u32) {
    let criterion = report()
        .criteria
        .iter()
        .find(|c| c.id == id)
        .expect("criterion present");
    println!(
        "criterion {}: {} - {}",
        criterion.id,
        if criterion.passed { "PASS" } else { "FAIL" },
        criterion.name
    );
    for cell in &criterion.cells {
        println!(
            "  [{}] {}: {}",
            if cell.passed { "ok" } else { "FAIL" },
            cell.label,
            cell.detail
        );
    }
    let failing: Vec<String> = criterion
        .cells
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.label, c.detail))
        .collect();
    assert!(
        criterion.passed,
        "criterion {} ({}) failed:\n{}",
        id,
        criterion.name,
        failing.join("\n")
    );
}

#[test]
fn criterion_1_closed_loop_hover_settling() {
    check(1);
}

#[test]
fn criterion_2_open_loop_contrast() {
    check(2);
}

#[test]
fn criterion_3_flapping_amplitudes() {
    check(3);
}

#[test]
fn criterion_4_averaged_system_stability() {
    check(4);
}

#[test]
fn criterion_5_smoothing_fidelity() {
    check(5);
}

#[test]
fn criterion_6_species_module_identities() {
    check(6);
}

#[test]
fn criterion_7_numerical_oracles() {
    check(7);
}

#[test]
fn criterion_8_determinism() {
    check(8);
}
