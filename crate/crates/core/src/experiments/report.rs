use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentSpec;
use crate::error::{Error, Result};
use crate::metrics::{mean, sample_std, ConfidenceInterval};

/// One (configuration, metric) result with the raw values behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: String,
    pub metric: String,
    /// Per-fold, per-seed or single-split values.
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `values`.
    pub std: f64,
    pub ci: Option<ConfidenceInterval>,
}

impl Cell {
    pub fn new(row: impl Into<String>, metric: impl Into<String>, values: Vec<f64>) -> Self {
        Cell {
            row: row.into(),
            metric: metric.into(),
            mean: mean(&values),
            std: sample_std(&values),
            values,
            ci: None,
        }
    }

    pub fn with_ci(mut self, ci: ConfidenceInterval) -> Self {
        self.ci = Some(ci);
        self
    }
}

/// Numeric table for CSV export; `None` marks an empty entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of every dataset the experiment touched, in order of use.
    pub dataset_sha256: Vec<String>,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub config: ExperimentSpec,
    pub cells: Vec<Cell>,
    pub tables: BTreeMap<String, Table>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn cell(&self, row: &str, metric: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.metric == metric)
    }

    /// Mean of a cell, panicking with the coordinates if it is absent.
    pub fn mean_of(&self, row: &str, metric: &str) -> f64 {
        self.cell(row, metric)
            .unwrap_or_else(|| panic!("report `{}` has no cell ({row}, {metric})", self.id))
            .mean
    }

    pub fn rows(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.row.as_str()) {
                out.push(&c.row);
            }
        }
        out
    }

    /// Equal in every field except wall time.
    pub fn same_results(&self, other: &ExperimentReport) -> bool {
        self.id == other.id
            && self.config == other.config
            && self.cells == other.cells
            && self.tables == other.tables
            && self.notes == other.notes
            && self.provenance == other.provenance
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Aligned text table of every cell.
    pub fn to_table(&self) -> String {
        let header = ["configuration", "metric", "mean", "std", "95% CI", "n"];
        let body: Vec<[String; 6]> = self
            .cells
            .iter()
            .map(|c| {
                [
                    c.row.clone(),
                    c.metric.clone(),
                    format!("{:.4}", c.mean),
                    if c.values.len() > 1 { format!("{:.4}", c.std) } else { "-".into() },
                    c.ci.map_or_else(|| "-".into(), |ci| format!("[{:.3}, {:.3}]", ci.lo, ci.hi)),
                    c.values.len().to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for r in &body {
            for (w, v) in widths.iter_mut().zip(r) {
                *w = (*w).max(v.chars().count());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.id);
        let line = |out: &mut String, cols: &[&str]| {
            let mut s = String::new();
            for (j, v) in cols.iter().enumerate() {
                let pad = widths[j] - v.chars().count();
                if j < 2 {
                    let _ = write!(s, "{v}{}  ", " ".repeat(pad));
                } else {
                    let _ = write!(s, "{}{v}  ", " ".repeat(pad));
                }
            }
            let _ = writeln!(out, "{}", s.trim_end());
        };
        line(&mut out, &header);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
        for r in &body {
            line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// Writes `report.json`, `report.txt` and one CSV per table into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        self.save(&json)?;
        written.push(json);
        let txt = dir.join("report.txt");
        std::fs::write(&txt, self.to_table()).map_err(|e| Error::io(&txt, e))?;
        written.push(txt);
        for (name, table) in &self.tables {
            let p = dir.join(format!("{name}.csv"));
            table.write_csv(&p)?;
            written.push(p);
        }
        Ok(written)
    }
}
