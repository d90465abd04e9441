//! Report bundle: deterministic `report.json` plus CSV companions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnalysisError, ClassRboRow, CorrelationMatrix, MrrRboRow, PredicateImportanceTable};
use crate::error::{Error, Result};
use crate::kg::LoadReport;
use crate::neighborhood::Hop;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    /// SHA-256 over the train, valid, test and types files, in that order.
    pub content_hash: String,
    pub load: LoadReport,
    /// Entities whose embedding row has zero norm, per model.
    pub zero_norm_entities: BTreeMap<String, Vec<String>>,
    /// Entities with an empty element set, per hop.
    pub empty_neighborhoods: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub config: serde_json::Value,
    pub datasets: Vec<DatasetMeta>,
    pub rank_tie_policy: String,
}

/// Mean RBO for one (dataset, model, hop, K), averaged over all entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRboCell {
    pub hop: Hop,
    pub k: usize,
    pub mean_rbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRow {
    pub dataset: String,
    pub model: String,
    pub entities: usize,
    pub mrr: Option<f64>,
    pub hits_at_1: Option<f64>,
    pub hits_at_3: Option<f64>,
    pub hits_at_10: Option<f64>,
    pub rank_records: Option<usize>,
    pub rbo: Vec<GlobalRboCell>,
}

impl GlobalRow {
    pub fn rbo(&self, hop: Hop, k: usize) -> Option<f64> {
        self.rbo.iter().find(|c| c.hop == hop && c.k == k).map(|c| c.mean_rbo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: ReportMetadata,
    pub global: Vec<GlobalRow>,
    pub per_class: Vec<ClassRboRow>,
    pub model_correlations: Vec<CorrelationMatrix>,
    pub mrr_rbo: Vec<MrrRboRow>,
    pub predicate_importance: Vec<PredicateImportanceTable>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn has_analyses(&self) -> bool {
        !(self.global.is_empty()
            && self.per_class.is_empty()
            && self.model_correlations.is_empty()
            && self.mrr_rbo.is_empty()
            && self.predicate_importance.is_empty())
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Invariant(format!("report serialization: {e}")))?;
        let mut text =
            serde_json::to_string_pretty(&value).map_err(|e| Error::Invariant(format!("report serialization: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("report.json: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    w.write_record(header).map_err(|e| Error::io(path, e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn global_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for g in &report.global {
        let base = |metric: String, value: String| vec![g.dataset.clone(), g.model.clone(), metric, value];
        rows.push(base("entities".into(), g.entities.to_string()));
        for (name, value) in [
            ("mrr", g.mrr),
            ("hits_at_1", g.hits_at_1),
            ("hits_at_3", g.hits_at_3),
            ("hits_at_10", g.hits_at_10),
        ] {
            rows.push(base(name.into(), opt(value)));
        }
        for cell in &g.rbo {
            rows.push(base(format!("R{}@{}", cell.hop, cell.k), num(cell.mean_rbo)));
        }
    }
    rows
}

fn per_class_rows(report: &Report) -> Vec<Vec<String>> {
    report
        .per_class
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.model.clone(),
                r.hop.to_string(),
                r.k.to_string(),
                r.class.clone(),
                num(r.mean_rbo),
                r.rank_within_model.to_string(),
                r.support.to_string(),
            ]
        })
        .collect()
}

fn correlation_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for m in &report.model_correlations {
        let kind = serde_json::to_value(m.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        for (i, a) in m.models.iter().enumerate() {
            for (j, b) in m.models.iter().enumerate() {
                rows.push(vec![
                    kind.clone(),
                    m.hop.to_string(),
                    a.clone(),
                    b.clone(),
                    opt(m.values[i][j]),
                    m.cells_used[i][j].to_string(),
                ]);
            }
        }
    }
    rows
}

fn mrr_rbo_rows(report: &Report) -> Vec<Vec<String>> {
    report
        .mrr_rbo
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.hop.to_string(),
                r.k.to_string(),
                opt(r.pearson),
                r.datasets.join(";"),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

fn predicate_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for t in &report.predicate_importance {
        for (rank, w) in t.weights.iter().enumerate() {
            rows.push(vec![
                t.dataset.clone(),
                t.class.clone(),
                t.model.clone(),
                t.k.to_string(),
                (rank + 1).to_string(),
                w.predicate.clone(),
                num(w.weight),
                w.count.to_string(),
            ]);
        }
    }
    rows
}

type CsvTable<'a> = (&'a str, &'a [&'a str], Vec<Vec<String>>);

/// Writes the bundle into `dir` and returns the written paths.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    if !report.has_analyses() {
        return Err(AnalysisError::EmptyReport.into());
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;

    let tables: [CsvTable; 5] = [
        (
            "global.csv",
            &["dataset", "model", "metric", "value"],
            global_rows(report),
        ),
        (
            "per_class_rbo.csv",
            &[
                "dataset",
                "model",
                "hop",
                "k",
                "class",
                "mean_rbo",
                "rank_within_model",
                "support",
            ],
            per_class_rows(report),
        ),
        (
            "correlations.csv",
            &["kind", "hop", "model_a", "model_b", "value", "cells_used"],
            correlation_rows(report),
        ),
        (
            "mrr_rbo.csv",
            &["model", "hop", "k", "pearson", "datasets", "note"],
            mrr_rbo_rows(report),
        ),
        (
            "predicate_importance.csv",
            &["dataset", "class", "model", "k", "rank", "predicate", "weight", "count"],
            predicate_rows(report),
        ),
    ];
    let mut written = vec![json_path];
    for (name, header, rows) in tables {
        let path = dir.join(name);
        write_csv(&path, header, rows)?;
        written.push(path);
    }
    Ok(written)
}

/// A table cell present in at least one of two compared reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellDiff {
    pub table: String,
    pub key: String,
    pub left: Option<String>,
    pub right: Option<String>,
}

fn cells(report: &Report) -> BTreeMap<(String, String), String> {
    let mut out = BTreeMap::new();
    let mut put = |table: &str, key: String, value: String| {
        out.insert((table.to_owned(), key), value);
    };
    for row in global_rows(report) {
        put("global", format!("{}|{}|{}", row[0], row[1], row[2]), row[3].clone());
    }
    for row in per_class_rows(report) {
        let key = format!("{}|{}|R{}@{}|{}", row[0], row[1], row[2], row[3], row[4]);
        put("per_class_rbo", format!("{key}|mean_rbo"), row[5].clone());
        put("per_class_rbo", format!("{key}|rank"), row[6].clone());
        put("per_class_rbo", format!("{key}|support"), row[7].clone());
    }
    for row in correlation_rows(report) {
        put(
            "correlations",
            format!("{}|hop{}|{}|{}", row[0], row[1], row[2], row[3]),
            row[4].clone(),
        );
    }
    for row in mrr_rbo_rows(report) {
        put("mrr_rbo", format!("{}|R{}@{}", row[0], row[1], row[2]), row[3].clone());
    }
    for row in predicate_rows(report) {
        put(
            "predicate_importance",
            format!("{}|{}|{}|{}|{}", row[0], row[1], row[2], row[3], row[5]),
            row[6].clone(),
        );
    }
    out
}

fn numerically_close(a: &str, b: &str, tolerance: f64) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= tolerance,
        _ => false,
    }
}

/// Cells that differ between two reports (absent on one side, or values
/// further apart than `tolerance`).
pub fn diff_reports(left: &Report, right: &Report, tolerance: f64) -> Vec<CellDiff> {
    let a = cells(left);
    let b = cells(right);
    let mut keys: Vec<&(String, String)> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|key| {
            let l = a.get(key);
            let r = b.get(key);
            let same = match (l, r) {
                (Some(x), Some(y)) => x == y || numerically_close(x, y, tolerance),
                _ => false,
            };
            (!same).then(|| CellDiff {
                table: key.0.clone(),
                key: key.1.clone(),
                left: l.cloned(),
                right: r.cloned(),
            })
        })
        .collect()
}
