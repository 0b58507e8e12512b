//! Experiment reports: a numeric table, summary values and pass/fail checks.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub relation: &'static str,
}

impl Check {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold, relation: "<" }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value > threshold, relation: ">" }
    }

    pub fn equals(name: &str, value: f64, target: f64) -> Self {
        Self { name: name.into(), value, threshold: target, passed: value == target, relation: "==" }
    }

    /// A boolean property, reported as 1 (holds) or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, threshold: 1.0, passed: ok, relation: "==" }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.6e} {} {:.6e}", self.name, self.value, self.relation, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Vec<(String, f64)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.summary.push((key.into(), value));
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Comment lines with the experiment, seed and summary, then a header
    /// row and the table with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# experiment={} seed={}", self.experiment, self.seed)?;
        for (k, v) in &self.summary {
            writeln!(w, "# {k}={v:.16e}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment {} (seed {}), {} rows", self.experiment, self.seed, self.rows.len())?;
        for (k, v) in &self.summary {
            writeln!(f, "  {k} = {v:.6e}")?;
        }
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = Report::new("demo", 4, &["x", "y"]);
        r.push_row(vec![1.0, 0.1]);
        r.note("count", 1.0);
        r.check(Check::below("err", 0.5, 1.0));
        let csv = r.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# experiment=demo seed=4");
        assert_eq!(lines[1], "# count=1.0000000000000000e0");
        assert_eq!(lines[2], "x,y");
        assert_eq!(lines[3], "1.0000000000000000e0,1.0000000000000001e-1");
        assert!(r.passed());
        r.check(Check::above("p", 0.001, 0.01));
        assert!(!r.passed());
        assert_eq!(r.column("y").unwrap(), vec![0.1]);
    }
}
