use crate::coder::{code_utterance, AggregatedPrediction, Verdict};
use crate::dataset::Dataset;
use crate::domain::MiCode;
use crate::exec::Execution;
use crate::gateway::{into_complete, plan_requests, Gateway, ModelRequest, Trajectory};

use super::config::RunConfig;
use super::metrics::{confusion, metrics, MetricsReport};
use super::EvalError;

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: RunConfig,
    /// Grouped by utterance, then (prompt, sample).
    pub trajectories: Vec<Trajectory>,
    pub predictions: Vec<AggregatedPrediction>,
    pub metrics: MetricsReport,
}

impl ExperimentOutput {
    pub fn cache_hits(&self) -> usize {
        self.trajectories.iter().filter(|t| t.cached).count()
    }
}

/// Query, aggregate and score every evaluable utterance under one configuration.
pub fn run_experiment(
    gateway: &Gateway,
    config: &RunConfig,
    dataset: &Dataset,
) -> Result<ExperimentOutput, EvalError> {
    run_experiment_with(gateway, config, dataset, Execution::default())
}

pub fn run_experiment_with(
    gateway: &Gateway,
    config: &RunConfig,
    dataset: &Dataset,
    exec: Execution,
) -> Result<ExperimentOutput, EvalError> {
    config.validate()?;
    let items: Vec<_> = dataset.evaluable().collect();
    let per_utterance = config.trajectories_per_utterance();

    let mut requests: Vec<ModelRequest> = Vec::with_capacity(items.len() * per_utterance);
    for (item, _) in &items {
        requests.extend(plan_requests(
            &item.input(),
            &config.prompts,
            config.modality,
            &config.sampling,
        )?);
    }
    let labels: Vec<String> = requests.iter().map(ModelRequest::label).collect();
    let results = gateway.query_all(&requests, &config.sampling);
    let trajectories = into_complete(results, &labels).map_err(|failures| EvalError::Failed {
        config: config.name.clone(),
        failures,
    })?;

    // A single trajectory is its own majority, so both aggregation modes share
    // one path; validation already pinned single runs to one trajectory.
    let groups: Vec<&[Trajectory]> = trajectories.chunks(per_utterance.max(1)).collect();
    let mut predictions: Vec<AggregatedPrediction> = exec.map(&groups, |group| {
        code_utterance(group[0].utterance_id.clone(), group)
    });

    let mut gold = Vec::with_capacity(items.len());
    let mut pred = Vec::with_capacity(items.len());
    let mut unresolved = 0;
    for (p, (_, g)) in predictions.iter_mut().zip(&items) {
        p.gold_code = Some(*g);
        gold.push(*g);
        pred.push(match p.verdict {
            Verdict::Code(c) => c,
            Verdict::Unresolved => {
                unresolved += 1;
                config.unresolved_as
            }
        });
    }
    let mut report = metrics(&confusion(&gold, &pred)?);
    report.unresolved_mapped = unresolved;

    Ok(ExperimentOutput {
        config: config.clone(),
        trajectories,
        predictions,
        metrics: report,
    })
}

/// Score an existing predictions file against the gold codes it carries.
pub fn evaluate_predictions(
    predictions: &[AggregatedPrediction],
    unresolved_as: MiCode,
) -> Result<MetricsReport, EvalError> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut unresolved = 0;
    for p in predictions {
        let Some(g) = p.gold_code else {
            return Err(EvalError::InvalidConfig(format!(
                "prediction {} has no gold code",
                p.utterance_id
            )));
        };
        gold.push(g);
        pred.push(p.verdict.code().unwrap_or_else(|| {
            unresolved += 1;
            unresolved_as
        }));
    }
    let mut report = metrics(&confusion(&gold, &pred)?);
    report.unresolved_mapped = unresolved;
    Ok(report)
}

pub struct SuiteRun {
    pub name: String,
    pub result: Result<ExperimentOutput, EvalError>,
}

/// Run each configuration in turn; a failing configuration is recorded and the
/// suite moves on.
pub fn run_ablation_suite(
    gateway: &Gateway,
    dataset: &Dataset,
    configs: &[RunConfig],
) -> Vec<SuiteRun> {
    configs
        .iter()
        .map(|cfg| {
            let result = run_experiment(gateway, cfg, dataset);
            if let Err(e) = &result {
                log::warn!("{}: {e}", cfg.name);
            }
            SuiteRun {
                name: cfg.name.clone(),
                result,
            }
        })
        .collect()
}
