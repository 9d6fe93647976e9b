//! Pass/fail bookkeeping for the acceptance suite in `tests/acceptance.rs`.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Result of one sub-check inside a criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(label: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            label: label.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// `value < bound`.
    pub fn below(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(label, value < bound, format!("{value:.3e} < {bound:.0e}"))
    }
}

/// Outcome of a whole criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub elapsed: Duration,
    pub lines: Vec<String>,
}

impl CriterionResult {
    pub fn status_line(&self) -> String {
        format!(
            "{} criterion {}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs criteria in order and prints one status line per criterion, with
/// the sub-check details indented below it.
#[derive(Debug, Default)]
pub struct Suite {
    selected: Vec<u32>,
    results: Vec<CriterionResult>,
}

impl Suite {
    /// Criteria whose number is in `selected` run; an empty list runs all.
    pub fn new(selected: Vec<u32>) -> Self {
        Suite {
            selected,
            results: Vec::new(),
        }
    }

    /// Parses criterion numbers from the command line, ignoring flags that
    /// the test runner passes through.
    pub fn from_args() -> Self {
        Suite::new(std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect())
    }

    pub fn results(&self) -> &[CriterionResult] {
        &self.results
    }

    /// Runs `body` unless deselected. A panic or error fails the criterion,
    /// as does exceeding `budget`.
    pub fn criterion<F>(&mut self, id: u32, title: &str, budget: Duration, body: F)
    where
        F: FnOnce() -> Result<Vec<Check>, String>,
    {
        if !self.selected.is_empty() && !self.selected.contains(&id) {
            return;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(body));
        let elapsed = start.elapsed();
        let mut lines = Vec::new();
        let mut pass = match outcome {
            Ok(Ok(checks)) if !checks.is_empty() => {
                for c in &checks {
                    lines.push(format!(
                        "{} {}: {}",
                        if c.pass { "ok  " } else { "FAIL" },
                        c.label,
                        c.detail
                    ));
                }
                checks.iter().all(|c| c.pass)
            }
            Ok(Ok(_)) => {
                lines.push("no checks ran".into());
                false
            }
            Ok(Err(e)) => {
                lines.push(format!("error: {e}"));
                false
            }
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                lines.push(format!("panic: {msg}"));
                false
            }
        };
        if elapsed > budget {
            pass = false;
            lines.push(format!(
                "FAIL runtime: {:.1} s exceeds the {:.0} s budget",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            ));
        }
        let result = CriterionResult {
            id,
            title: title.into(),
            pass,
            elapsed,
            lines,
        };
        println!("{}", result.status_line());
        for l in &result.lines {
            println!("      {l}");
        }
        self.results.push(result);
    }

    pub fn summary(&self) -> String {
        let passed = self.results.iter().filter(|r| r.pass).count();
        let mut out = format!("acceptance: {passed}/{} criteria passed", self.results.len());
        let failed: Vec<String> = self
            .results
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.id.to_string())
            .collect();
        if !failed.is_empty() {
            let _ = write!(out, "; failed: {}", failed.join(", "));
        }
        out
    }

    /// Prints the summary; failure unless every criterion that ran passed.
    pub fn finish(self) -> ExitCode {
        println!("{}", self.summary());
        if self.results.iter().all(|r| r.pass) {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}
