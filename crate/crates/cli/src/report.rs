use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Suite};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One line of the summary: what was expected, what came out, and the slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        expected: impl Into<String>,
        observed: impl Into<String>,
        tolerance: impl Into<String>,
        pass: bool,
    ) -> Self {
        Check {
            name: name.into(),
            expected: expected.into(),
            observed: observed.into(),
            tolerance: tolerance.into(),
            pass,
        }
    }

    /// `|observed - expected| <= tolerance`.
    pub fn within(name: impl Into<String>, expected: f64, observed: f64, tolerance: f64) -> Self {
        let pass = (observed - expected).abs() <= tolerance;
        Check::new(name, num(expected), num(observed), format!("abs {}", num(tolerance)), pass)
    }

    /// `|observed - expected| <= rel |expected|`.
    pub fn relative(name: impl Into<String>, expected: f64, observed: f64, rel: f64) -> Self {
        let err = (observed - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        Check::new(name, num(expected), num(observed), format!("rel {}", num(rel)), err <= rel)
    }

    /// A Monte Carlo mean against its target, `|z| <= 4`.
    pub fn z(name: impl Into<String>, expected: f64, estimate: f64, se: f64) -> Self {
        let z = trapwalk::harness::z_score(estimate, se, expected);
        Check::new(
            name,
            num(expected),
            format!("{} (se {}, z {:.2})", num(estimate), num(se), z),
            format!("|z| <= {}", trapwalk::harness::Z_TOLERANCE),
            z.abs() <= trapwalk::harness::Z_TOLERANCE,
        )
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: expected {} observed {} tolerance {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.expected,
            self.observed,
            self.tolerance
        )
    }
}

/// Shortest round-trip form, so equal values print identically.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-4..1e9).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Rows of numbers behind a suite's checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl SuiteReport {
    pub fn new(suite: Suite) -> Self {
        SuiteReport { suite, checks: Vec::new(), tables: Vec::new() }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(s, "{}: {passed}/{} checks passed", self.suite, self.checks.len());
        s
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn header(cfg: &ExperimentConfig) -> String {
    format!("# trapwalk {VERSION} config-sha256 {}\n", config_hash(cfg))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn checks_csv(cfg: &ExperimentConfig, report: &SuiteReport) -> String {
    let mut s = header(cfg);
    s.push_str("check,expected,observed,tolerance,pass\n");
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            csv_field(&c.name),
            csv_field(&c.expected),
            csv_field(&c.observed),
            csv_field(&c.tolerance),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    s
}

pub fn table_csv(cfg: &ExperimentConfig, table: &Table) -> String {
    let mut s = header(cfg);
    let cols: Vec<String> = table.columns.iter().map(|c| csv_field(c)).collect();
    s.push_str(&cols.join(","));
    s.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct JsonReport<'a> {
    version: &'static str,
    config_hash: String,
    config: &'a ExperimentConfig,
    suite: Suite,
    all_pass: bool,
    checks: &'a [Check],
    tables: &'a [Table],
}

pub fn report_json(cfg: &ExperimentConfig, report: &SuiteReport) -> String {
    let j = JsonReport {
        version: VERSION,
        config_hash: config_hash(cfg),
        config: cfg,
        suite: report.suite,
        all_pass: report.all_pass(),
        checks: &report.checks,
        tables: &report.tables,
    };
    serde_json::to_string_pretty(&j).expect("report serializes") + "\n"
}

/// Writes `<suite>.csv`, `<suite>.json` and `<suite>-<table>.csv`; returns
/// the paths in that order.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, report: &SuiteReport) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let name = report.suite.name();
    let mut files = vec![
        (dir.join(format!("{name}.csv")), checks_csv(cfg, report)),
        (dir.join(format!("{name}.json")), report_json(cfg, report)),
    ];
    for t in &report.tables {
        files.push((dir.join(format!("{name}-{}.csv", t.name)), table_csv(cfg, t)));
    }
    let mut paths = Vec::with_capacity(files.len());
    for (path, text) in files {
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_commas_and_has_header() {
        let cfg = ExperimentConfig::new(Suite::Speed, 1);
        let mut r = SuiteReport::new(Suite::Speed);
        r.check(Check::new("a, b", "1", "2", "x", false));
        let text = checks_csv(&cfg, &r);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# trapwalk "));
        assert_eq!(lines.nth(1).unwrap(), "\"a, b\",1,2,x,FAIL");
    }

    #[test]
    fn hash_ignores_threads() {
        let mut cfg = ExperimentConfig::new(Suite::Einstein, 9);
        let h = config_hash(&cfg);
        cfg.threads = crate::config::Threads::Count(3);
        assert_eq!(config_hash(&cfg), h);
        cfg.seed = 10;
        assert_ne!(config_hash(&cfg), h);
    }

    #[test]
    fn checks_compare_as_documented() {
        assert!(Check::within("w", 1.0, 1.5, 0.5).pass);
        assert!(!Check::relative("r", 2.0, 2.1, 0.01).pass);
        assert!(Check::z("z", 0.0, 0.3, 0.1).pass);
        assert!(!Check::z("z", 0.0, 0.5, 0.1).pass);
    }
}
