//! Reporting helpers for the acceptance run.

use std::fmt;
use std::time::Duration;

/// Result of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {}: {} | {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// `hits / n`, with an empty population counting as zero.
pub fn share(hits: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// Print every verdict and a closing tally; returns whether all passed.
pub fn summarize(verdicts: &[Verdict]) -> bool {
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed of {}",
        verdicts.len() - failed,
        verdicts.len()
    );
    failed == 0
}
