//! Residual records and their CSV / text emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub check_id: String,
    pub point_index: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl CheckRecord {
    /// A record that passes iff `residual < tolerance` (NaN fails).
    pub fn new(check_id: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let outcome = if residual < tolerance {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        CheckRecord {
            check_id: check_id.into(),
            point_index: 0,
            residual,
            tolerance,
            outcome,
        }
    }

    pub fn skipped(check_id: impl Into<String>, tolerance: f64, reason: impl Into<String>) -> Self {
        CheckRecord {
            check_id: check_id.into(),
            point_index: 0,
            residual: f64::NAN,
            tolerance,
            outcome: Outcome::Skipped(reason.into()),
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    records: Vec<CheckRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSummary {
    pub check_id: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub skip_reasons: Vec<String>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.records.push(record);
    }

    pub fn check(&mut self, check_id: impl Into<String>, residual: f64, tolerance: f64) {
        self.push(CheckRecord::new(check_id, residual, tolerance));
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.records.extend(other.records);
    }

    pub fn records(&self) -> &[CheckRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Relabels every record with the given sample index.
    pub fn at_point(mut self, point_index: usize) -> Self {
        for r in &mut self.records {
            r.point_index = point_index;
        }
        self
    }

    pub fn get(&self, check_id: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.check_id == check_id)
    }

    /// Largest residual among records with the given id (NaN-skipping).
    pub fn max_residual(&self, check_id: &str) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.check_id == check_id && !r.residual.is_nan())
            .map(|r| r.residual)
            .reduce(f64::max)
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| !r.failed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| r.failed())
    }

    /// Stable sort by `(check_id, point_index)`.
    pub fn normalize(&mut self) {
        self.records
            .sort_by(|a, b| a.check_id.cmp(&b.check_id).then(a.point_index.cmp(&b.point_index)));
    }

    pub fn summary(&self) -> Vec<CheckSummary> {
        let mut by_id: BTreeMap<&str, CheckSummary> = BTreeMap::new();
        for r in &self.records {
            let s = by_id.entry(&r.check_id).or_insert_with(|| CheckSummary {
                check_id: r.check_id.clone(),
                max_residual: f64::NAN,
                tolerance: r.tolerance,
                passed: 0,
                failed: 0,
                skipped: 0,
                skip_reasons: Vec::new(),
            });
            if !r.residual.is_nan() {
                s.max_residual = if s.max_residual.is_nan() {
                    r.residual
                } else {
                    s.max_residual.max(r.residual)
                };
            }
            match &r.outcome {
                Outcome::Pass => s.passed += 1,
                Outcome::Fail => s.failed += 1,
                Outcome::Skipped(why) => {
                    s.skipped += 1;
                    if !s.skip_reasons.contains(why) {
                        s.skip_reasons.push(why.clone());
                    }
                }
            }
        }
        by_id.into_values().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,point_index,residual,tolerance,passed\n");
        for r in &self.records {
            let passed = match r.outcome {
                Outcome::Pass => "true",
                Outcome::Fail => "false",
                Outcome::Skipped(_) => "skipped",
            };
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{}",
                r.check_id, r.point_index, r.residual, r.tolerance, passed
            );
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let summary = self.summary();
        let width = summary.iter().map(|s| s.check_id.len()).max().unwrap_or(8).max(8);
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {:>9}  {:>6}  {:>6}  {:>7}  status",
            "check", "max_resid", "tol", "pass", "fail", "skipped"
        );
        for s in &summary {
            let status = if s.failed > 0 { "FAIL" } else { "ok" };
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.3e}  {:>9.1e}  {:>6}  {:>6}  {:>7}  {}",
                s.check_id, s.max_residual, s.tolerance, s.passed, s.failed, s.skipped, status
            );
            for why in &s.skip_reasons {
                let _ = writeln!(out, "{:<width$}    skipped: {}", "", why);
            }
        }
        let failed: usize = summary.iter().map(|s| s.failed).sum();
        let _ = writeln!(
            out,
            "{} records, {} failed: {}",
            self.records.len(),
            failed,
            if failed == 0 { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Writes `<prefix>.csv` and `<prefix>.summary.txt`; returns both paths.
pub fn emit_report(report: &CheckReport, prefix: &Path) -> io::Result<(PathBuf, PathBuf)> {
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let csv = with_suffix(prefix, ".csv");
    let txt = with_suffix(prefix, ".summary.txt");
    fs::write(&csv, report.to_csv())?;
    fs::write(&txt, report.summary_text())?;
    Ok((csv, txt))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
