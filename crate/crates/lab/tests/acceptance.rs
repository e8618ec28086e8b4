//! The acceptance criteria, one test each, at their stated tolerances. Each
//! test prints a PASS/FAIL line to stderr (uncaptured) before asserting.

use std::io::Write;
use std::sync::LazyLock;

use polylab::config::Fault;
use polylab::verify::Suite;

static SUITE: LazyLock<Suite> = LazyLock::new(|| {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    Suite::new(0, workers, Fault::None)
});

fn criterion(id: &str) {
    let check = SUITE.run(id).expect("known check id");
    let _ = writeln!(std::io::stderr(), "{}", check.line());
    assert!(check.passed, "{}: {}", check.line(), check.details);
}

#[test]
fn c1_collision_scaling() {
    criterion("C1");
}

#[test]
fn c2_sparsification_law() {
    criterion("C2");
}

#[test]
fn c3_gradient_correctness() {
    criterion("C3");
}

#[test]
fn c4_moment_identities() {
    criterion("C4");
}

#[test]
fn c5_single_active_output_gradient() {
    criterion("C5");
}

#[test]
fn c6_kurtosis_ordering() {
    criterion("C6");
}

#[test]
fn c7_affine_spacing() {
    criterion("C7");
}

#[test]
fn c8_collision_resolution() {
    criterion("C8");
}

#[test]
fn c9_solution_quality() {
    criterion("C9");
}
