use std::fmt;

use codimlab::experiments::ExperimentReport;

/// One or more `--assert` checks failed.
#[derive(Debug)]
pub struct AssertionFailed(pub Vec<String>);

impl fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

impl std::error::Error for AssertionFailed {}

/// Collects named ordering checks and reports them on stderr.
#[derive(Default)]
pub struct Checks {
    failed: Vec<String>,
}

impl Checks {
    pub fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        eprintln!("[{}] {what}", if ok { "ok" } else { "FAIL" });
        if !ok {
            self.failed.push(what);
        }
    }

    pub fn finish(self) -> anyhow::Result<()> {
        if self.failed.is_empty() {
            Ok(())
        } else {
            Err(AssertionFailed(self.failed).into())
        }
    }
}

/// Aggregate mean, or NaN when the row is absent.
pub fn mean(report: &ExperimentReport, codim: usize, eps: f64, metric: &str) -> f64 {
    report
        .aggregate(codim, eps, metric)
        .map_or(f64::NAN, |a| a.mean)
}
