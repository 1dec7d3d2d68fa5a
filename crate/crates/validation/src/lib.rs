//! Runner for the acceptance suite in `tests/acceptance.rs`: one PASS/FAIL
//! line per criterion, nonzero exit when any selected criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

/// `Ok((pass, detail))`, or `Err` when the check could not be evaluated.
pub type Check = fn() -> Result<(bool, String), String>;

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget: Duration,
    pub check: Check,
}

impl Criterion {
    /// Name used for `--list` and filters.
    pub fn key(&self) -> String {
        format!("criterion_{:02}_{}", self.id, self.name.replace([' ', '-'], "_"))
    }
}

/// Criteria whose key contains one of `filters`; all of them when there are none.
pub fn select<'a>(criteria: &'a [Criterion], filters: &[&str]) -> Vec<&'a Criterion> {
    criteria
        .iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| c.key().contains(f)))
        .collect()
}

/// Runs the criteria selected by the command line. Understands the libtest
/// conventions cargo passes through: `--list` and positional name filters.
pub fn run(criteria: &[Criterion], args: &[String]) -> ExitCode {
    if args.iter().any(|a| a == "--list") {
        for c in criteria {
            println!("{}: test", c.key());
        }
        return ExitCode::SUCCESS;
    }
    let filters: Vec<&str> = args
        .iter()
        .filter(|a| !a.starts_with('-'))
        .map(String::as_str)
        .collect();
    let selected = select(criteria, &filters);
    let mut failed = Vec::new();
    for crit in &selected {
        let start = Instant::now();
        let outcome = (crit.check)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(r) => r,
            Err(err) => (false, format!("error: {err}")),
        };
        let in_budget = elapsed <= crit.budget;
        let pass = ok && in_budget;
        println!(
            "{} [{:>2}] {}: {} ({:.2}s of {}s{})",
            if pass { "PASS" } else { "FAIL" },
            crit.id,
            crit.name,
            detail,
            elapsed.as_secs_f64(),
            crit.budget.as_secs(),
            if in_budget { "" } else { ", over budget" }
        );
        if !pass {
            failed.push(crit.id);
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        selected.len() - failed.len(),
        selected.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
