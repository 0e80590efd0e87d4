//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 3 4`.

use std::process::ExitCode;

use ccg_core::selftest::{
    criterion_convexity, criterion_example, criterion_existence, criterion_expectation, criterion_fixed_points,
    criterion_gadget, criterion_learning, criterion_marginal_invariance, criterion_special_solver, CaseOutcome,
};

const SEED: u64 = 0;

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> CaseOutcome); 9] = [
        (1, criterion_example),
        (2, criterion_expectation),
        (3, || criterion_special_solver(SEED)),
        (4, || criterion_learning(SEED)),
        (5, || criterion_fixed_points(SEED)),
        (6, criterion_gadget),
        (7, || criterion_convexity(SEED)),
        (8, || criterion_marginal_invariance(SEED)),
        (9, || criterion_existence(SEED)),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let outcome = run();
        println!("{}", outcome.line());
        failed += usize::from(!outcome.passed);
    }
    if failed == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
