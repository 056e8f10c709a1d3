//! Check results and their text/CSV serialization.

use std::path::Path;
use std::time::Duration;

use crate::error::{GeoError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Threshold {
    /// Pass when `value < limit`.
    Below(f64),
    /// Pass when `lo <= value <= hi`.
    Within(f64, f64),
    /// Pass when the value is exactly true (encoded as 1).
    Holds,
}

impl Threshold {
    pub fn accepts(&self, value: f64) -> bool {
        match *self {
            Threshold::Below(limit) => value < limit,
            Threshold::Within(lo, hi) => (lo..=hi).contains(&value),
            Threshold::Holds => value == 1.0,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Threshold::Below(l) => format!("< {l:e}"),
            Threshold::Within(lo, hi) => format!("in [{lo}, {hi}]"),
            Threshold::Holds => "holds".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: String,
    pub name: String,
    /// Name of the mathematical property the check exercises.
    pub tag: String,
    pub value: f64,
    pub threshold: Threshold,
    pub pass: bool,
    pub note: String,
    pub wall: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
    }

    /// Serializes without wall times, so identical runs give identical bytes.
    pub fn emit(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => {
                let mut out = String::from("index,suite,check,tag,value,threshold,pass\n");
                for (i, c) in self.checks.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        i + 1,
                        c.suite,
                        c.name,
                        c.tag,
                        c.value,
                        c.threshold.describe(),
                        c.pass
                    ));
                }
                out
            }
            ReportFormat::Text => {
                let mut out = String::new();
                for (i, c) in self.checks.iter().enumerate() {
                    out.push_str(&format!(
                        "{:>3} {} {:<11} {:<34} [{}] value={:.6e} {}{}\n",
                        i + 1,
                        if c.pass { "PASS" } else { "FAIL" },
                        c.suite,
                        c.name,
                        c.tag,
                        c.value,
                        c.threshold.describe(),
                        if c.note.is_empty() { String::new() } else { format!("  ({})", c.note) }
                    ));
                }
                let failed = self.checks.iter().filter(|c| !c.pass).count();
                out.push_str(&format!(
                    "overall: {} ({} checks, {} failed)\n",
                    if self.pass() { "PASS" } else { "FAIL" },
                    self.checks.len(),
                    failed
                ));
                out
            }
        }
    }

    pub fn timing_summary(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{}/{}: {:.2?}\n", c.suite, c.name, c.wall))
            .collect()
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GeoError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| GeoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(pass: bool) -> Check {
        Check {
            suite: "geodesic".into(),
            name: "demo".into(),
            tag: "euclidean-exactness".into(),
            value: 1e-12,
            threshold: Threshold::Below(1e-10),
            pass,
            note: String::new(),
            wall: Duration::from_millis(3),
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = SuiteReport::default();
        assert_eq!(r.emit(ReportFormat::Csv), "index,suite,check,tag,value,threshold,pass\n");
        assert!(r.pass());
    }

    #[test]
    fn single_and_mixed_reports() {
        let mut r = SuiteReport::default();
        r.push(check(true));
        let csv = r.emit(ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
        r.push(check(false));
        assert!(!r.pass());
        assert!(r.emit(ReportFormat::Text).contains("overall: FAIL"));
    }

    #[test]
    fn thresholds() {
        assert!(Threshold::Within(1.8, 2.2).accepts(2.0));
        assert!(!Threshold::Below(1.0).accepts(1.0));
        assert!(Threshold::Holds.accepts(1.0) && !Threshold::Holds.accepts(0.0));
    }
}
