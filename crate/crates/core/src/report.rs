//! Experiment reports, data tables and plot descriptions.

use serde::{Deserialize, Serialize};

/// How a metric's pass/fail is decided from its stored values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `value < target`
    Below,
    /// `value <= target`
    AtMost,
    /// `value > target`
    Above,
    /// `|value − target| <= tolerance`
    Near,
    /// `interval` contains `target`
    IntervalContainsTarget,
    /// `value == 1`
    IsTrue,
    /// Recorded for reference, always passes.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    pub check: Check,
    pub pass: bool,
}

impl Metric {
    fn build(name: impl Into<String>, value: f64, check: Check) -> Self {
        Metric {
            name: name.into(),
            value,
            target: None,
            tolerance: None,
            interval: None,
            check,
            pass: true,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self::build(name, value, Check::Info)
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::build(name, value, Check::Below).with_target(limit)
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::build(name, value, Check::AtMost).with_target(limit)
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::build(name, value, Check::Above).with_target(limit)
    }

    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let mut m = Self::build(name, value, Check::Near).with_target(target);
        m.tolerance = Some(tolerance);
        m.evaluate()
    }

    pub fn contains(name: impl Into<String>, value: f64, interval: [f64; 2], target: f64) -> Self {
        let mut m = Self::build(name, value, Check::IntervalContainsTarget);
        m.interval = Some(interval);
        m.with_target(target)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::build(name, if ok { 1.0 } else { 0.0 }, Check::IsTrue).evaluate()
    }

    pub fn with_interval(mut self, interval: [f64; 2]) -> Self {
        self.interval = Some(interval);
        self.evaluate()
    }

    fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self.evaluate()
    }

    /// Recomputes `pass` from the stored values.
    pub fn recompute(&self) -> bool {
        let t = self.target.unwrap_or(f64::NAN);
        match self.check {
            Check::Below => self.value < t,
            Check::AtMost => self.value <= t,
            Check::Above => self.value > t,
            Check::Near => (self.value - t).abs() <= self.tolerance.unwrap_or(f64::NAN),
            Check::IntervalContainsTarget => self
                .interval
                .is_some_and(|[lo, hi]| lo <= t && t <= hi),
            Check::IsTrue => self.value == 1.0,
            Check::Info => true,
        }
    }

    fn evaluate(mut self) -> Self {
        self.pass = self.recompute();
        self
    }
}

/// Structured result of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    /// Echo of the resolved configuration.
    pub config: serde_json::Value,
    pub metrics: Vec<Metric>,
    /// Quality flags such as node clamps or excluded bins.
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub tables: Vec<String>,
    #[serde(default)]
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            version: crate::version().to_string(),
            seed,
            workers: 0,
            config,
            metrics: Vec::new(),
            flags: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, metric: Metric) {
        self.metrics.push(metric);
    }

    pub fn all_pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| !m.pass)
    }
}

/// Numeric table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub name: String,
    /// Written as a leading `#` line.
    pub comment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn new(name: &str, comment: &str, columns: &[&str]) -> Self {
        DataTable {
            name: name.to_string(),
            comment: comment.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Shortest round-trip float formatting, so equal data gives equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n{}\n", self.comment, self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    Steps,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, style: SeriesStyle, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.to_string(), style, points }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            name: name.to_string(),
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub tables: Vec<DataTable>,
    pub plots: Vec<Plot>,
}

impl ExperimentRun {
    pub fn new(report: ExperimentReport) -> Self {
        ExperimentRun { report, tables: Vec::new(), plots: Vec::new() }
    }

    pub fn add_table(&mut self, table: DataTable) {
        self.report.tables.push(format!("{}.csv", table.name));
        self.tables.push(table);
    }

    pub fn table(&self, name: &str) -> Option<&DataTable> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn checks() {
        assert!(Metric::below("a", 0.01, 0.05).pass);
        assert!(!Metric::below("a", 0.05, 0.05).pass);
        assert!(Metric::at_most("a", 0.05, 0.05).pass);
        assert!(Metric::near("a", 1.01, 1.0, 0.02).pass);
        assert!(!Metric::near("a", 1.03, 1.0, 0.02).pass);
        assert!(Metric::contains("r", 0.99, [0.98, 1.01], 1.0).pass);
        assert!(!Metric::flag("f", false).pass);
        assert!(Metric::info("i", f64::NAN).pass);
    }

    #[test]
    fn csv_layout() {
        let mut t = DataTable::new("t", "comment", &["a", "b"]);
        t.push(vec![1.0, 0.1]);
        t.push(vec![2.5, 1e-20]);
        assert_eq!(t.to_csv(), "# comment\na,b\n1,0.1\n2.5,0.00000000000000000001\n");
    }

    proptest! {
        #[test]
        fn report_json_round_trip(
            values in prop::collection::vec(-1e12f64..1e12, 1..6),
            seed in any::<u64>(),
        ) {
            let mut r = ExperimentReport::new("x", seed, serde_json::json!({"a": values[0]}));
            for (i, v) in values.iter().enumerate() {
                r.push(Metric::near(format!("m{i}"), *v, v * 0.999_999_7, 1e-3).with_interval([v - 1.0, v + 1.0]));
            }
            r.flags.push("flag".into());
            r.wall_time_s = 0.125;
            let json = serde_json::to_string(&r).unwrap();
            let back: ExperimentReport = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &r);
            for m in &back.metrics {
                prop_assert_eq!(m.recompute(), m.pass);
            }
        }
    }
}
