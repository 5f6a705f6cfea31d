//! The `verify` subcommand: re-run the built-in certification suites, print
//! one line per check, and leave a JSON report behind.

use std::path::{Path, PathBuf};

use serde::Serialize;

use recmarl_core::verify::{self, SuiteReport};

use crate::error::CliError;

pub fn suite_reports(suite: &str) -> Result<Vec<SuiteReport>, CliError> {
    match suite {
        "decomposition" => Ok(vec![verify::decomposition_suite()]),
        "gradient" => Ok(vec![verify::gradient_suite()]),
        "monotone" => Ok(vec![verify::monotone_suite()]),
        "td_accuracy" => Ok(vec![verify::td_accuracy_suite()]),
        "all" => Ok(verify::all_suites()),
        other => Err(CliError::validation(format!(
            "unknown suite `{other}` (expected decomposition, gradient, monotone, td_accuracy, or all)"
        ))),
    }
}

pub fn format_report(reports: &[SuiteReport]) -> String {
    let mut out = String::new();
    for report in reports {
        for check in &report.checks {
            let status = if check.passed { "PASS" } else { "FAIL" };
            out.push_str(status);
            out.push(' ');
            out.push_str(report.suite);
            out.push('/');
            out.push_str(&check.name);
            out.push_str(": measured ");
            out.push_str(&check.measured.to_string());
            out.push_str(" bound ");
            out.push_str(&check.bound.to_string());
            if !check.note.is_empty() {
                out.push(' ');
                out.push_str(&check.note);
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct CheckJson<'a> {
    name: &'a str,
    passed: bool,
    measured: Option<f64>,
    bound: Option<f64>,
    note: &'a str,
}

#[derive(Serialize)]
struct SuiteJson<'a> {
    suite: &'a str,
    passed: bool,
    checks: Vec<CheckJson<'a>>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    version: &'a str,
    passed: bool,
    suites: Vec<SuiteJson<'a>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn report_json(reports: &[SuiteReport]) -> String {
    let doc = ReportJson {
        version: env!("CARGO_PKG_VERSION"),
        passed: reports.iter().all(|r| r.passed()),
        suites: reports
            .iter()
            .map(|r| SuiteJson {
                suite: r.suite,
                passed: r.passed(),
                checks: r
                    .checks
                    .iter()
                    .map(|c| CheckJson {
                        name: &c.name,
                        passed: c.passed,
                        measured: finite(c.measured),
                        bound: finite(c.bound),
                        note: &c.note,
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// Report location: the flag, then `RECMARL_OUT`, then the working
/// directory.
pub fn resolve_report_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(p) = std::env::var("RECMARL_OUT") {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from(".")
}

/// Runs the named suite, echoes every check, writes
/// `verify_<suite>.json`, and fails with a verification error naming the
/// checks that did not hold. The report is written even when checks fail.
pub fn verify_command(suite: &str, out_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let reports = suite_reports(suite)?;
    print!("{}", format_report(&reports));

    let dir = resolve_report_dir(out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("verify_{suite}.json"));
    std::fs::write(&path, report_json(&reports))
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;

    let failing: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{}/{}", r.suite, c.name))
        })
        .collect();
    if failing.is_empty() {
        Ok(path)
    } else {
        Err(CliError::Verification(format!(
            "{} check(s) failed: {}",
            failing.len(),
            failing.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use recmarl_core::verify::Check;

    fn toy_report() -> SuiteReport {
        SuiteReport {
            suite: "toy",
            checks: vec![
                Check {
                    name: "holds".to_string(),
                    passed: true,
                    measured: 0.5,
                    bound: 1.0,
                    note: "(worst case)".to_string(),
                },
                Check {
                    name: "skipped".to_string(),
                    passed: false,
                    measured: f64::NAN,
                    bound: f64::INFINITY,
                    note: String::new(),
                },
            ],
        }
    }

    #[test]
    fn unknown_suites_are_a_validation_error() {
        let err = suite_reports("bogus").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn lines_carry_status_suite_and_numbers() {
        let text = format_report(&[toy_report()]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("PASS toy/holds: measured 0.5 bound 1 (worst case)"));
        assert_eq!(lines.next(), Some("FAIL toy/skipped: measured NaN bound inf"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn non_finite_numbers_become_json_nulls() {
        let json = report_json(&[toy_report()]);
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        let checks = &doc["suites"][0]["checks"];
        assert_eq!(checks[0]["measured"], 0.5);
        assert!(checks[1]["measured"].is_null());
        assert!(checks[1]["bound"].is_null());
        assert_eq!(doc["passed"], false);
    }
}
