//! Comparison tables and run artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataset::{to_jsonl, DatasetError};
use crate::gateway::{CacheMode, Gateway, PromptId};

use super::config::RunConfig;
use super::metrics::MetricsReport;
use super::runner::SuiteRun;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub metrics: Option<MetricsReport>,
    /// `complete`, or `failed: <reason>`.
    pub status: String,
}

impl ReportRow {
    pub fn complete(method: impl Into<String>, metrics: MetricsReport) -> Self {
        Self {
            method: method.into(),
            metrics: Some(metrics),
            status: "complete".into(),
        }
    }

    pub fn failed(method: impl Into<String>, reason: impl std::fmt::Display) -> Self {
        Self {
            method: method.into(),
            metrics: None,
            status: format!("failed: {reason}"),
        }
    }
}

/// A fraction as a percentage with two decimals: 0.5256 -> "52.56".
pub fn percent(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

const COLUMNS: [&str; 8] = [
    "method",
    "accuracy",
    "precision",
    "recall",
    "macro_f1",
    "n",
    "unresolved",
    "status",
];

fn cells(row: &ReportRow) -> [String; 8] {
    let m = row.metrics.as_ref();
    let pct = |f: fn(&MetricsReport) -> f64| m.map(|m| percent(f(m))).unwrap_or_default();
    [
        row.method.clone(),
        pct(|m| m.accuracy),
        pct(|m| m.macro_precision),
        pct(|m| m.macro_recall),
        pct(|m| m.macro_f1),
        m.map(|m| m.n.to_string()).unwrap_or_default(),
        m.map(|m| m.unresolved_mapped.to_string())
            .unwrap_or_default(),
        row.status.clone(),
    ]
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = cells(row).iter().map(|c| csv_field(c)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn render_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "| METHOD | ACCURACY | PRECISION | RECALL | MACRO-F1 | N | UNRESOLVED | STATUS |\n",
    );
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---|\n");
    for row in rows {
        let c = cells(row).map(|s| s.replace('|', "\\|"));
        let _ = writeln!(out, "| {} |", c.join(" | "));
    }
    out.push_str(
        "\nAll metrics are percentages. Precision and recall are macro-averaged over CT, ST and FN; \
macro-F1 is the unweighted mean of per-class F1. Unresolved utterances (every response abstained) \
are scored as the configured fallback code and counted in the UNRESOLVED column.\n",
    );
    out
}

pub fn rows_from_suite(runs: &[SuiteRun]) -> Vec<ReportRow> {
    runs.iter()
        .map(|r| match &r.result {
            Ok(out) => ReportRow::complete(&r.name, out.metrics.clone()),
            Err(e) => ReportRow::failed(&r.name, e),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRun {
    pub name: String,
    pub config: Option<RunConfig>,
    pub status: String,
    pub utterances: usize,
    pub trajectories: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_unix_s: u64,
    pub backend_id: String,
    pub cache_dir: Option<PathBuf>,
    pub cache_mode: String,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub template_versions: BTreeMap<String, String>,
    pub runs: Vec<ManifestRun>,
}

impl RunManifest {
    pub fn new(gateway: &Gateway, runs: &[SuiteRun], configs: &[RunConfig]) -> Self {
        let template_versions = PromptId::ALL
            .iter()
            .map(|p| (p.as_str().to_string(), p.template().version()))
            .collect();
        let runs = runs
            .iter()
            .map(|r| {
                let config = configs.iter().find(|c| c.name == r.name).cloned();
                match &r.result {
                    Ok(o) => ManifestRun {
                        name: r.name.clone(),
                        config,
                        status: "complete".into(),
                        utterances: o.predictions.len(),
                        trajectories: o.trajectories.len(),
                        cache_hits: o.cache_hits(),
                    },
                    Err(e) => ManifestRun {
                        name: r.name.clone(),
                        config,
                        status: format!("failed: {e}"),
                        utterances: 0,
                        trajectories: 0,
                        cache_hits: 0,
                    },
                }
            })
            .collect();
        Self {
            created_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            backend_id: gateway.backend_id().to_string(),
            cache_dir: gateway.cache().map(|c| c.dir().to_path_buf()),
            cache_mode: match gateway.mode() {
                CacheMode::Off => "off",
                CacheMode::ReadWrite => "read-write",
                CacheMode::ReplayOnly => "replay-only",
            }
            .into(),
            cache_hits: gateway.cache().map_or(0, |c| c.hits()),
            cache_misses: gateway.cache().map_or(0, |c| c.misses()),
            template_versions,
            runs,
        }
    }
}

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
pub const MANIFEST: &str = "run-manifest.json";

pub fn trajectory_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.traj.jsonl"))
}

pub fn prediction_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.pred.jsonl"))
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<PathBuf, DatasetError> {
    fs::write(&path, bytes).map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}

pub fn write_report(out_dir: &Path, rows: &[ReportRow]) -> Result<Vec<PathBuf>, DatasetError> {
    fs::create_dir_all(out_dir).map_err(|e| DatasetError::io(out_dir, e))?;
    Ok(vec![
        write(out_dir.join(REPORT_CSV), render_csv(rows))?,
        write(out_dir.join(REPORT_MD), render_markdown(rows))?,
    ])
}

/// Write per-configuration trajectory and prediction logs, the report, and
/// the manifest. Failed configurations contribute a report row only.
pub fn write_suite(
    out_dir: &Path,
    gateway: &Gateway,
    runs: &[SuiteRun],
    configs: &[RunConfig],
) -> Result<Vec<PathBuf>, DatasetError> {
    fs::create_dir_all(out_dir).map_err(|e| DatasetError::io(out_dir, e))?;
    let mut written = Vec::new();
    for run in runs {
        if let Ok(out) = &run.result {
            written.push(write(
                trajectory_path(out_dir, &run.name),
                to_jsonl(&out.trajectories),
            )?);
            written.push(write(
                prediction_path(out_dir, &run.name),
                to_jsonl(&out.predictions),
            )?);
        }
    }
    written.extend(write_report(out_dir, &rows_from_suite(runs))?);
    let manifest = RunManifest::new(gateway, runs, configs);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    written.push(write(out_dir.join(MANIFEST), json)?);
    Ok(written)
}
