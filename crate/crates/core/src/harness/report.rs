use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::progressive::RoundSummary;
use crate::router::Evaluation;

/// Accuracy table: one row per condition, one column per date group, plus
/// the unweighted average of the row's cells. Values are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<f64>,
    pub average: f64,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: Vec<String>) -> Self {
        Table {
            title: title.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, cells: Vec<f64>) {
        assert_eq!(cells.len(), self.columns.len(), "row width must match columns");
        let average = mean(&cells);
        self.rows.push(TableRow {
            label: label.into(),
            cells,
            average,
        });
    }

    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn render(&self) -> String {
        let label_width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain([self.title.len().min(24), 9])
            .max()
            .unwrap_or(9);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .chain(std::iter::once(&"Average".to_string()))
            .map(|c| c.len().max(6))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = write!(out, "{:<label_width$}", "Condition");
        for (c, w) in self.columns.iter().map(String::as_str).chain(["Average"]).zip(&widths) {
            let _ = write!(out, " | {c:>w$}");
        }
        out.push('\n');
        let rule = label_width + widths.iter().map(|w| w + 3).sum::<usize>();
        let _ = writeln!(out, "{}", "-".repeat(rule));
        for row in &self.rows {
            let _ = write!(out, "{:<label_width$}", row.label);
            for (v, w) in row.cells.iter().chain([&row.average]).zip(&widths) {
                let _ = write!(out, " | {v:>w$.1}");
            }
            out.push('\n');
        }
        out
    }
}

/// Paired per-seed difference `treatment - baseline` of average accuracy,
/// in percentage points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub treatment: String,
    pub baseline: String,
    pub per_seed: Vec<f64>,
    pub mean_diff: f64,
    pub std_dev: f64,
    pub std_err: f64,
}

impl PairedComparison {
    pub fn new(treatment: &str, baseline: &str, per_seed: Vec<f64>) -> Self {
        let n = per_seed.len() as f64;
        let mean_diff = mean(&per_seed);
        let std_dev = if per_seed.len() > 1 {
            (per_seed.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        PairedComparison {
            treatment: treatment.into(),
            baseline: baseline.into(),
            mean_diff,
            std_dev,
            std_err: std_dev / n.sqrt(),
            per_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub date: String,
    pub train: usize,
    pub test: usize,
    pub rounds: usize,
    pub case1: usize,
    pub case2: usize,
    pub fallbacks: usize,
    /// Accuracy of the assigned pseudo-labels against sidecar truth.
    pub pseudo_label_accuracy: Option<f64>,
    /// Accuracy of the final branch on the test samples.
    pub model_accuracy: Option<f64>,
    pub history: Vec<RoundSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub config_digest: String,
    pub config: Config,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<Table>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<PairedComparison>,
}

impl RunReport {
    pub fn new(command: &str, config: &Config) -> Self {
        RunReport {
            command: command.into(),
            seed: config.seed,
            config_digest: config.digest(),
            config: config.clone(),
            groups: Vec::new(),
            evaluation: None,
            tables: Vec::new(),
            comparisons: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "deem {} (seed {}, config {})", self.command, self.seed, &self.config_digest[..12]);
        if !self.groups.is_empty() {
            out.push('\n');
            let _ = writeln!(
                out,
                "{:<12} | {:>5} | {:>5} | {:>6} | {:>5} | {:>5} | {:>8} | {:>8} | {:>8}",
                "Group", "train", "test", "rounds", "case1", "case2", "fallback", "PL acc%", "model%"
            );
            let _ = writeln!(out, "{}", "-".repeat(92));
            let pct = |v: Option<f64>| v.map_or("-".to_string(), |a| format!("{:.1}", 100.0 * a));
            for g in &self.groups {
                let _ = writeln!(
                    out,
                    "{:<12} | {:>5} | {:>5} | {:>6} | {:>5} | {:>5} | {:>8} | {:>8} | {:>8}",
                    g.date,
                    g.train,
                    g.test,
                    g.rounds,
                    g.case1,
                    g.case2,
                    g.fallbacks,
                    pct(g.pseudo_label_accuracy),
                    pct(g.model_accuracy)
                );
            }
            let avg = |f: fn(&GroupRow) -> Option<f64>| -> Option<f64> {
                let vals: Option<Vec<f64>> = self.groups.iter().map(f).collect();
                vals.map(|v| mean(&v))
            };
            let _ = writeln!(
                out,
                "{:<12} | {:>5} | {:>5} | {:>6} | {:>5} | {:>5} | {:>8} | {:>8} | {:>8}",
                "Average",
                "",
                "",
                "",
                "",
                "",
                "",
                pct(avg(|g| g.pseudo_label_accuracy)),
                pct(avg(|g| g.model_accuracy))
            );
        }
        for table in &self.tables {
            out.push('\n');
            out.push_str(&table.render());
        }
        if !self.comparisons.is_empty() {
            out.push('\n');
            for c in &self.comparisons {
                let _ = writeln!(
                    out,
                    "{} - {}: mean {:+.2} pts (sd {:.2}, se {:.2}, n {})",
                    c.treatment,
                    c.baseline,
                    c.mean_diff,
                    c.std_dev,
                    c.std_err,
                    c.per_seed.len()
                );
            }
        }
        out
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
