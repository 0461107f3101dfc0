//! Acceptance battery: one PASS/FAIL line per criterion.
//!
//! Criterion 9 includes the bubble-chain bound, which is false at nearest
//! neighbours. Its line prints FAIL with the first counterexample. The
//! target exits nonzero when any other criterion fails, when criterion 9
//! fails on anything other than that bound, or when the bound starts to
//! hold, so the known failure stays visible without hiding regressions.

use std::process::ExitCode;

use lwwlab::verify::{criterion, Params};

const KNOWN_FALSE_PREFIX: &str = "BC-Bound";

fn main() -> ExitCode {
    let params = Params { budget: lwwlab::enumerate::Budget::from_env(), ..Params::default() };
    let mut unexpected = Vec::new();
    for k in 1..=12 {
        let report = match criterion(k, &params) {
            Ok(r) => r,
            Err(e) => {
                println!("FAIL [{k:>2}] error: {e}");
                unexpected.push(k);
                continue;
            }
        };
        println!("{}", report.summary());
        if k == 9 {
            let failing: Vec<_> = report.failures().collect();
            for c in &failing {
                println!("       {}: {}", c.name, c.detail);
            }
            let only_known = failing.iter().all(|c| c.name.starts_with(KNOWN_FALSE_PREFIX));
            if failing.is_empty() || !only_known {
                unexpected.push(k);
            }
        } else if !report.passed() {
            for c in report.failures() {
                println!("       {}: {}", c.name, c.detail);
            }
            unexpected.push(k);
        }
    }
    if unexpected.is_empty() {
        println!("11 of 12 criteria pass; criterion 9 fails only on the bubble-chain bound, as documented");
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
