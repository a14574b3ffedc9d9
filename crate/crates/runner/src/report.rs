//! Result tables: one row per (dataset, method), mean±std over repeats.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::RunnerError;
use crate::pipeline::ExperimentResult;
use crate::reference;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, RunnerError> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(RunnerError::Invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Mean and population standard deviation. Empty input gives NaN.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.2}±{std:.2}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub metric: String,
    pub n_train: usize,
    pub repeats: usize,
    pub mean: f64,
    pub std: f64,
    pub cell: String,
    pub reference: Option<String>,
}

/// Groups results by (dataset, method, n_train) in first-seen order and pools their
/// per-repeat values.
pub fn rows(results: &[ExperimentResult]) -> Vec<ReportRow> {
    let mut groups: Vec<(String, String, usize, Vec<&ExperimentResult>)> = Vec::new();
    for r in results {
        match groups.iter_mut().find(|g| g.0 == r.dataset && g.1 == r.method && g.2 == r.n_train) {
            Some(g) => g.3.push(r),
            None => groups.push((r.dataset.clone(), r.method.clone(), r.n_train, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(dataset, method, n_train, rs)| {
            let values: Vec<f64> = rs.iter().flat_map(|r| r.summary.values.iter().copied()).collect();
            let (mean, std) = mean_std(&values);
            let metric = rs[0].summary.metric.clone();
            let reference = if metric == "accuracy" {
                reference::method_column(&method).and_then(|c| reference::lookup(&dataset, c)).map(String::from)
            } else {
                None
            };
            ReportRow {
                n_train,
                repeats: values.len(),
                cell: format_cell(mean, std),
                dataset,
                method,
                metric,
                mean,
                std,
                reference,
            }
        })
        .collect()
}

pub fn render(results: &[ExperimentResult], format: ReportFormat) -> Result<String, RunnerError> {
    let rows = rows(results);
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["dataset", "method", "metric", "n_train", "repeats", "mean", "std", "cell", "reference"])
                .map_err(|e| RunnerError::Io(e.to_string()))?;
            for r in &rows {
                w.write_record([
                    r.dataset.clone(),
                    r.method.clone(),
                    r.metric.clone(),
                    r.n_train.to_string(),
                    r.repeats.to_string(),
                    format!("{:.4}", r.mean),
                    format!("{:.4}", r.std),
                    r.cell.clone(),
                    r.reference.clone().unwrap_or_default(),
                ])
                .map_err(|e| RunnerError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| RunnerError::Io(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut s = String::from("| dataset | method | metric | n_train | repeats | result | reference |\n");
            s.push_str("|---|---|---|---:|---:|---:|---:|\n");
            for r in &rows {
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} |\n",
                    r.dataset,
                    r.method,
                    r.metric,
                    r.n_train,
                    r.repeats,
                    r.cell,
                    r.reference.as_deref().unwrap_or("-")
                ));
            }
            Ok(s)
        }
    }
}

pub fn emit_report(results: &[ExperimentResult], format: ReportFormat, path: &Path) -> Result<(), RunnerError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render(results, format)?)?;
    Ok(())
}
