//! Acceptance gate: one line per criterion, nonzero exit on any failure.

use mapless_core::acceptance::{run_acceptance, Tolerances};

fn main() {
    let results = run_acceptance(&Tolerances::default(), &[]);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
