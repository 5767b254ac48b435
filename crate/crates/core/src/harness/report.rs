//! Serialization of metric reports as CSV, JSON and Markdown tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::MetricsReport;
use super::metrics::mean_std;
use super::variant::Variant;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

/// One CSV row per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub variant: Variant,
    pub seed: u64,
    pub accuracy: f64,
    pub auc: f64,
    pub config_hash: String,
    pub split_hash: String,
}

impl From<&MetricsReport> for RunRow {
    fn from(r: &MetricsReport) -> Self {
        Self {
            variant: r.variant,
            seed: r.seed,
            accuracy: r.accuracy,
            auc: r.auc,
            config_hash: r.config_hash.clone(),
            split_hash: r.split_hash.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

/// Groups runs by variant (in [`Variant::ALL`] order) into mean and sample
/// standard deviation.
pub fn summarize(reports: &[MetricsReport]) -> Vec<SummaryRow> {
    Variant::ALL
        .iter()
        .filter_map(|&v| {
            let runs: Vec<_> = reports.iter().filter(|r| r.variant == v).collect();
            if runs.is_empty() {
                return None;
            }
            let (am, asd) = mean_std(&runs.iter().map(|r| r.accuracy).collect::<Vec<_>>());
            let (um, usd) = mean_std(&runs.iter().map(|r| r.auc).collect::<Vec<_>>());
            Some(SummaryRow {
                variant: v,
                seeds: runs.iter().map(|r| r.seed).collect(),
                accuracy_mean: am,
                accuracy_std: asd,
                auc_mean: um,
                auc_std: usd,
            })
        })
        .collect()
}

pub fn to_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(RunRow::from(r))
            .map_err(|e| Error::Internal(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<RunRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("csv: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub config_hashes: Vec<String>,
    pub seeds: Vec<u64>,
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<MetricsReport>,
}

pub fn to_json(reports: &[MetricsReport]) -> String {
    let mut hashes: Vec<String> = reports.iter().map(|r| r.config_hash.clone()).collect();
    hashes.dedup();
    let mut seeds: Vec<u64> = reports.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let doc = JsonReport {
        config_hashes: hashes,
        seeds,
        summary: summarize(reports),
        runs: reports.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

/// `| Model | Accuracy (%) | AUC (%) |` with `mean ± std` to two decimals.
pub fn to_markdown(reports: &[MetricsReport]) -> String {
    let mut out = String::from("| Model | Accuracy (%) | AUC (%) | Seeds |\n|---|---|---|---|\n");
    for row in summarize(reports) {
        out.push_str(&format!(
            "| {} | {:.2} ± {:.2} | {:.2} ± {:.2} | {} |\n",
            row.variant,
            row.accuracy_mean,
            row.accuracy_std,
            row.auc_mean,
            row.auc_std,
            row.seeds.len()
        ));
    }
    out
}

pub fn render(reports: &[MetricsReport], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => to_csv(reports),
        ReportFormat::Json => Ok(to_json(reports)),
        ReportFormat::Markdown => Ok(to_markdown(reports)),
    }
}

pub fn write_report(reports: &[MetricsReport], format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render(reports, format)?).map_err(|e| Error::io(path, e))
}

/// Reads a single metrics report or a combined JSON report.
pub fn load_reports(path: &Path) -> Result<Vec<MetricsReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(r) = serde_json::from_str::<MetricsReport>(&text) {
        return Ok(vec![r]);
    }
    if let Ok(doc) = serde_json::from_str::<JsonReport>(&text) {
        return Ok(doc.runs);
    }
    serde_json::from_str::<Vec<MetricsReport>>(&text)
        .map_err(|e| Error::Data(format!("{} is not a metrics report: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(variant: Variant, seed: u64, acc: f64, auc: f64) -> MetricsReport {
        MetricsReport {
            variant,
            seed,
            config_hash: "c0ffee".into(),
            split_hash: "5p1it".into(),
            kernel_sizes: vec![51, 101, 201],
            t_eval: 20,
            num_test: 80,
            accuracy: acc,
            auc,
            per_class_auc: vec![Some(90.0), None],
            per_class: vec![],
            member_accuracy: vec![acc; 3],
            denoise_l1: vec![],
            loss_curves: vec![],
        }
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![report(Variant::Full, 0, 91.25, 99.0), report(Variant::NoDdpm, 1, 80.0, 1.0 / 3.0)];
        let rows = from_csv(&to_csv(&rs).unwrap()).unwrap();
        assert_eq!(rows, rs.iter().map(RunRow::from).collect::<Vec<_>>());
    }

    #[test]
    fn markdown_two_decimals() {
        let rs = vec![report(Variant::Full, 0, 85.0, 97.0), report(Variant::Full, 1, 86.0, 98.0)];
        let md = to_markdown(&rs);
        assert!(md.contains("| full | 85.50 ± 0.71 | 97.50 ± 0.71 | 2 |"), "{md}");
    }

    #[test]
    fn json_has_provenance() {
        let rs = vec![report(Variant::Full, 3, 85.0, 97.0), report(Variant::Full, 1, 86.0, 98.0)];
        let doc: JsonReport = serde_json::from_str(&to_json(&rs)).unwrap();
        assert_eq!(doc.config_hashes, vec!["c0ffee".to_string()]);
        assert_eq!(doc.seeds, vec![1, 3]);
        assert_eq!(doc.runs, rs);
    }
}
