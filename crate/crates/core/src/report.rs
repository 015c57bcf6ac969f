//! Condition tables assembled from a bundle's metric files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::pipeline::{MetricFile, PipelineError};

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no metric files under {0}")]
    NoMetrics(PathBuf),
}

/// One table row: a metric over one pipeline step, by overlap condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub stage: String,
    pub metric: String,
    pub unit: String,
    /// Headline metrics: recombined tcpWER and every attack EER.
    pub primary: bool,
    /// Full-precision value per condition tag; None renders as a gap.
    pub values: Vec<(String, Option<f64>)>,
    /// Unweighted mean of the present values, recomputed at build time.
    pub average: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<(String, String)>,
}

/// A full report: one row per metric file, one column per condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Condition tags every row is rendered against, ascending.
    pub conditions: Vec<String>,
    pub rows: Vec<ConditionReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn is_primary(stage: &str, metric: &str) -> bool {
    (stage == "recombined" && metric == "tcpwer") || (stage.starts_with("attack") && metric == "eer")
}

/// Fixed presentation order: pipeline steps in chain order, attacks last.
fn row_rank(stage: &str, metric: &str) -> (usize, usize) {
    let stage_rank = match stage {
        "original" => 0,
        "extracted" => 1,
        "anonymized" => 2,
        "residual" => 3,
        "recombined" => 4,
        s if s.starts_with("attack") => 5,
        _ => 6,
    };
    let metric_rank = match metric {
        "tcpwer" => 0,
        "cpwer" => 1,
        "wer" => 2,
        "der" => 3,
        "eer" => 4,
        "sisdr" => 5,
        _ => 6,
    };
    (stage_rank, metric_rank)
}

/// Mean of the present values; None when every cell is a gap.
pub fn unweighted_average(values: &[(String, Option<f64>)]) -> Option<f64> {
    let present: Vec<f64> = values.iter().filter_map(|(_, v)| *v).collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

impl Report {
    /// Assemble a report from loaded metric files. Rows are ordered
    /// canonically; a row missing a condition gets a gap and a warning.
    pub fn from_metrics(mut files: Vec<MetricFile>) -> Report {
        files.sort_by(|a, b| {
            row_rank(&a.stage, &a.metric)
                .cmp(&row_rank(&b.stage, &b.metric))
                .then_with(|| a.stage.cmp(&b.stage))
                .then_with(|| a.metric.cmp(&b.metric))
        });
        let conditions: BTreeSet<String> =
            files.iter().flat_map(|f| f.values.keys().cloned()).collect();
        let conditions: Vec<String> = conditions.into_iter().collect();
        let mut warnings = Vec::new();
        let rows = files
            .into_iter()
            .map(|f| {
                let values: Vec<(String, Option<f64>)> = conditions
                    .iter()
                    .map(|tag| {
                        let v = f.values.get(tag).copied().flatten();
                        if v.is_none() {
                            warnings.push(format!(
                                "{} {}: no value for condition {tag}",
                                f.stage, f.metric
                            ));
                        }
                        (tag.clone(), v)
                    })
                    .collect();
                let average = unweighted_average(&values);
                ConditionReport {
                    primary: is_primary(&f.stage, &f.metric),
                    values,
                    average,
                    notes: f.notes.into_iter().collect(),
                    stage: f.stage,
                    metric: f.metric,
                    unit: f.unit,
                }
            })
            .collect();
        Report { conditions, rows, warnings }
    }

    /// Load every `metrics/*.json` under a bundle directory.
    pub fn from_bundle(bundle_dir: impl AsRef<Path>) -> Result<Report> {
        let dir = bundle_dir.as_ref().join("metrics");
        let entries = std::fs::read_dir(&dir)
            .map_err(|source| ReportError::Io { path: dir.clone(), source })?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|source| ReportError::Io { path: dir.clone(), source })?.path();
            if path.extension().is_some_and(|e| e == "json") {
                files.push(MetricFile::load(&path)?);
            }
        }
        if files.is_empty() {
            return Err(ReportError::NoMetrics(dir));
        }
        Ok(Report::from_metrics(files))
    }

    /// Fixed-width text table, one decimal, gaps as "-", primary rows
    /// marked with "*".
    pub fn render_text(&self) -> String {
        let mut widths = vec!["stage".len(), "metric".len()];
        let mut header = vec!["stage".to_string(), "metric".to_string()];
        for tag in &self.conditions {
            header.push(format!("{}%", tag.trim_start_matches('0')));
        }
        header.push("aver".into());
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![
                    format!("{}{}", row.stage, if row.primary { " *" } else { "" }),
                    format!("{} [{}]", row.metric, short_unit(&row.unit)),
                ];
                for (_, v) in &row.values {
                    cells.push(render_cell(*v));
                }
                cells.push(render_cell(row.average));
                cells
            })
            .collect();
        widths.resize(header.len(), 0);
        for cells in std::iter::once(&header).chain(rows.iter()) {
            for (i, c) in cells.iter().enumerate() {
                widths[i] = widths[i].max(c.len());
            }
        }
        let mut out = String::new();
        let fmt_row = |cells: &[String]| -> String {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i < 2 {
                        format!("{c:<width$}", width = widths[i])
                    } else {
                        format!("{c:>width$}", width = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        out.push_str(&fmt_row(&header));
        out.push('\n');
        for cells in &rows {
            out.push_str(&fmt_row(cells));
            out.push('\n');
        }
        if self.rows.iter().any(|r| r.primary) {
            out.push_str("* primary metric\n");
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    /// CSV with the same cells as the text table, unrounded.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("stage,metric,unit,primary");
        for tag in &self.conditions {
            out.push_str(&format!(",{tag}"));
        }
        out.push_str(",average\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{},{}", row.stage, row.metric, row.unit, row.primary));
            for (_, v) in &row.values {
                match v {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            match row.average {
                Some(v) => out.push_str(&format!(",{v}\n")),
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

fn short_unit(unit: &str) -> &str {
    match unit {
        "percent" => "%",
        "db" => "dB",
        other => other,
    }
}

fn render_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.1}"),
        None => "-".into(),
    }
}
