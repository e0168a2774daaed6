//! Acceptance criteria: one PASS/FAIL line per criterion at full scale.
//! Runs without the libtest harness so the lines always print:
//! `cargo test -p horolab-cli --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use horolab_cli::verify::{criterion, Scale, NAMES};

const SEED: u64 = 20_240_601;

/// Wall-clock budgets in seconds for the criteria that have one.
fn budget(id: u32) -> Option<u64> {
    match id {
        1 => Some(120),
        3 => Some(300),
        5 => Some(900),
        _ => None,
    }
}

fn main() -> ExitCode {
    let mut failures = Vec::new();
    for id in 1..=NAMES.len() as u32 {
        let start = Instant::now();
        let mut r = criterion(id, Scale::Full, SEED);
        let elapsed = start.elapsed();
        if let Some(b) = budget(id) {
            if elapsed > Duration::from_secs(b) {
                r.passed = false;
                r.detail.push_str(&format!(
                    "; runtime {:.1}s exceeds {b}s",
                    elapsed.as_secs_f64()
                ));
            }
        }
        println!("{} ({:.1}s)", r.line(), elapsed.as_secs_f64());
        if !r.passed {
            failures.push(id);
        }
    }
    if failures.is_empty() {
        println!("acceptance: all {} criteria pass", NAMES.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failures:?}");
        ExitCode::FAILURE
    }
}
