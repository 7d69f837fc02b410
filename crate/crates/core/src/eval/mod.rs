//! Metrics, experiment configurations, the experiment runner and reports.

mod config;
mod metrics;
mod report;
mod runner;

pub use config::{Aggregation, RunConfig, BUILTIN_NAMES};
pub use metrics::{confusion, metrics, ClassMetrics, ConfusionMatrix, MetricsReport, PerClass};
pub use report::{
    percent, prediction_path, render_csv, render_markdown, rows_from_suite, trajectory_path,
    write_report, write_suite, ManifestRun, ReportRow, RunManifest, MANIFEST, REPORT_CSV,
    REPORT_MD,
};
pub use runner::{
    evaluate_predictions, run_ablation_suite, run_experiment, run_experiment_with,
    ExperimentOutput, SuiteRun,
};

use thiserror::Error;

use crate::gateway::{FailedTrajectories, GatewayError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("run {config} incomplete: {failures}")]
    Failed {
        config: String,
        failures: FailedTrajectories,
    },
}

impl EvalError {
    pub fn is_backend_failure(&self) -> bool {
        match self {
            EvalError::Failed { .. } => true,
            EvalError::Gateway(e) => e.is_backend_failure(),
            _ => false,
        }
    }
}
