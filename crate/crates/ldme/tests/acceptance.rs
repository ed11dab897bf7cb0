//! Acceptance criteria at full scale, one PASS/FAIL line each. Lines go
//! straight to the stderr handle so they show without `--nocapture`.

use std::io::Write;
use std::sync::Mutex;

use ldme::checks::{self, CheckResult};

/// Time limits are wall-clock, so criteria run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(r: &CheckResult) {
    let _ = writeln!(std::io::stderr().lock(), "{}", r.line());
}

fn assert_blocking(r: CheckResult) {
    report(&r);
    assert!(r.passed, "{}", r.line());
}

#[test]
fn c1_list_decoding() {
    let _guard = serial();
    assert_blocking(checks::list_decoding(&[0.5, 0.25, 0.1], 20, 50, Some(300.0)));
}

#[test]
fn c2_spectral_sandwich() {
    let _guard = serial();
    assert_blocking(checks::spectral_sandwich(200, 40, 195, 2, Some(60.0)));
}

#[test]
fn c3_fantope_projection() {
    let _guard = serial();
    assert_blocking(checks::fantope(100, 12, 3, Some(120.0)));
}

#[test]
fn c4_sdp_decision() {
    let _guard = serial();
    assert_blocking(checks::sdp_decision(100, 99, 4, Some(300.0)));
}

#[test]
fn c5_approx_cost() {
    let _guard = serial();
    assert_blocking(checks::approx_cost_vs_oracle(50, 5, Some(180.0)));
}

#[test]
fn c6_sketch_accuracy() {
    let _guard = serial();
    assert_blocking(checks::sketch_accuracy(500, 6, Some(60.0)));
}

#[test]
fn c7_planted_partition() {
    let _guard = serial();
    assert_blocking(checks::planted_partition(2000, 10, Some(600.0)));
}

/// Recorded, never fails the suite.
#[test]
fn c8_scaling() {
    let _guard = serial();
    report(&checks::scaling(&[2000, 4000, 8000], 50, 8));
}
