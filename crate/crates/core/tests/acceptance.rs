//! Runs every acceptance criterion at its stated tolerance and prints one
//! pass/fail line per criterion. Details of failing criteria follow.

use std::process::ExitCode;
use std::time::Instant;

use greens_coulomb::validation::{criteria_for, hankel_identities, run_criterion, Suite};

fn main() -> ExitCode {
    let start = Instant::now();
    let mut failed = Vec::new();
    let identities = hankel_identities();
    if !identities.passed() {
        failed.push(identities.clone());
    }
    println!("{}", identities.summary());
    for id in criteria_for(Suite::All) {
        let t = Instant::now();
        let report = run_criterion(id);
        println!("{}  [{:.2} s]", report.summary(), t.elapsed().as_secs_f64());
        if !report.passed() {
            failed.push(report);
        }
    }
    for report in &failed {
        print!("\n{report}");
    }
    println!("\nacceptance: {} failed, total {:.1} s", failed.len(), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
