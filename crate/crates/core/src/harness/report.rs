use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{PivotRow, RunRecord};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Delimited,
    Json,
}

impl ReportFormat {
    /// `.json` / `.jsonl` → Json, anything else delimited.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") | Some("jsonl") => ReportFormat::Json,
            _ => ReportFormat::Delimited,
        }
    }
}

/// The maximum-H-train row of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRow {
    pub dataset: String,
    pub config_key: String,
    pub representation: String,
    pub clusterer: String,
    pub param: String,
    pub seed: u64,
    #[serde(rename = "H-train")]
    pub h_train: f64,
    #[serde(rename = "H-test")]
    pub h_test: f64,
    #[serde(rename = "VM-train")]
    pub vm_train: f64,
    #[serde(rename = "VM-test")]
    pub vm_test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub records: usize,
    pub failures: usize,
    pub best: Vec<BestRow>,
    pub best_path: PathBuf,
}

/// Argmax of H-train per dataset over successful runs. Ties go to the
/// record that comes first in canonical order.
pub fn best_rows(records: &[RunRecord]) -> Vec<BestRow> {
    let mut best: BTreeMap<&str, &RunRecord> = BTreeMap::new();
    for r in records {
        let Some(h) = r.h_train() else { continue };
        let slot = best.entry(&r.dataset).or_insert(r);
        let cur = slot.h_train().expect("only successful runs are stored");
        if h > cur || (h == cur && r.order < slot.order) {
            *slot = r;
        }
    }
    best.into_values()
        .map(|r| {
            let m = r.metrics.as_ref().expect("successful run");
            BestRow {
                dataset: r.dataset.clone(),
                config_key: r.config_key.clone(),
                representation: r.representation.clone(),
                clusterer: r.clusterer.clone(),
                param: r.param.to_string(),
                seed: r.seed,
                h_train: m.h_train,
                h_test: m.h_test,
                vm_train: m.vm_train,
                vm_test: m.vm_test,
            }
        })
        .collect()
}

const HEADER: [&str; 19] = [
    "dataset",
    "representation",
    "clusterer",
    "param",
    "seed",
    "n_clusters_effective",
    "n_clusters_model",
    "H-train",
    "H-test",
    "VM-train",
    "VM-test",
    "C-train",
    "C-test",
    "noise_fraction_train",
    "noise_fraction_test",
    "embed_time",
    "wall_time",
    "error",
    "config_key",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_delimited(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in records {
        let m = r.metrics.as_ref();
        w.write_record([
            r.dataset.clone(),
            r.representation.clone(),
            r.clusterer.clone(),
            r.param.to_string(),
            r.seed.to_string(),
            opt(r.n_clusters_effective),
            opt(r.n_clusters_model),
            opt(m.map(|m| m.h_train)),
            opt(m.map(|m| m.h_test)),
            opt(m.map(|m| m.vm_train)),
            opt(m.map(|m| m.vm_test)),
            opt(m.map(|m| m.c_train)),
            opt(m.map(|m| m.c_test)),
            opt(m.map(|m| m.noise_fraction_train)),
            opt(m.map(|m| m.noise_fraction_test)),
            format!("{:.6}", r.embed_time),
            format!("{:.6}", r.wall_time),
            r.error.clone().unwrap_or_default(),
            r.config_key.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn best_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.best.{ext}"),
        None => format!("{stem}.best"),
    };
    path.with_file_name(name)
}

/// Writes records in canonical order (dataset, then slice position) to
/// `path` and the best-row summary next to it as `<stem>.best.<ext>`.
pub fn emit_report(records: &[RunRecord], path: impl AsRef<Path>, format: ReportFormat) -> Result<ReportSummary, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    let path = path.as_ref();
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| (a.dataset.as_str(), a.order).cmp(&(b.dataset.as_str(), b.order)));
    let best = best_rows(&sorted);
    let bp = best_path(path);
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &sorted)?;
            serde_json::to_writer_pretty(BufWriter::new(File::create(&bp)?), &best)?;
        }
        ReportFormat::Delimited => {
            write_delimited(&sorted, path)?;
            let mut w = csv::Writer::from_path(&bp)?;
            for b in &best {
                w.serialize(b)?;
            }
            w.flush()?;
        }
    }
    Ok(ReportSummary {
        records: sorted.len(),
        failures: sorted.iter().filter(|r| r.is_failure()).count(),
        best,
        best_path: bp,
    })
}

/// Reads a JSON array of records or a JSON-lines checkpoint.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    let mut out = Vec::new();
    for line in BufReader::new(text.as_bytes()).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Ablation pivot as a delimited table: one row per method, one
/// `H-train-<k>` column per component count.
pub fn write_pivot(pivot: &[PivotRow], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let mut counts: Vec<usize> = pivot.iter().flat_map(|p| p.h_train.keys().copied()).collect();
    counts.sort_unstable();
    counts.dedup();
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "dataset,method")?;
    for k in &counts {
        write!(w, ",H-train-{k}")?;
    }
    writeln!(w)?;
    for p in pivot {
        write!(w, "{},{}", p.dataset, p.method.short_name())?;
        for k in &counts {
            write!(w, ",{}", opt(p.h_train.get(k).copied().flatten()))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
