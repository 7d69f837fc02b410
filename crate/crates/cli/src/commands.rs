use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use mmsc_core::align::{align_session, apply_qc, AlignedUtterance, QcDecision};
use mmsc_core::coder::{code_utterance, AggregatedPrediction};
use mmsc_core::dataset::{
    aligned_path, check_session_id, from_jsonl, to_jsonl, write_clips, Dataset, DatasetError,
};
use mmsc_core::defaults;
use mmsc_core::eval::{
    evaluate_predictions, percent, render_markdown, rows_from_suite, run_ablation_suite,
    write_report, write_suite, Aggregation, EvalError, ReportRow, BUILTIN_NAMES,
};
use mmsc_core::gateway::{
    Backend, CacheMode, Gateway, HttpBackend, MockBackend, MockScript, MockServer, ReplayBackend,
    ResponseCache, Trajectory,
};
use mmsc_core::ingest::{parse_asr_words, parse_reference_transcript, read_wav};
use mmsc_core::UtteranceId;

use crate::args::{
    AggregateArgs, AlignArgs, BackendKind, EvaluateArgs, MockBackendArgs, ReportArgs, RunArgs,
    SegmentArgs,
};
use crate::config::FileConfig;
use crate::CliError;

const MOCK_SCRIPT_FILE: &str = "mock_script.json";
const PRED_SUFFIX: &str = ".pred.jsonl";

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| DatasetError::io(path, e).into())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| DatasetError::io(path, e).into())
}

fn single_session<'a>(ids: impl IntoIterator<Item = &'a UtteranceId>) -> Result<String, CliError> {
    let mut sessions: Vec<&str> = ids.into_iter().map(|id| id.session_id.as_str()).collect();
    sessions.sort();
    sessions.dedup();
    match sessions.as_slice() {
        [one] => {
            check_session_id(one)?;
            Ok(one.to_string())
        }
        [] => Err(CliError::Invalid("no utterances".into())),
        many => Err(CliError::Invalid(format!(
            "expected one session per file, found {}",
            many.join(", ")
        ))),
    }
}

pub fn align(a: AlignArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.config.as_deref())?;
    let min_score = file.min_score(a.min_score)?;
    let scope = a
        .qc_scope
        .map(Into::into)
        .or(file.qc_scope)
        .unwrap_or_default();

    let audio = read_wav(&read(&a.audio)?)?;
    let words = parse_asr_words(&read(&a.asr)?)?;
    let reference = parse_reference_transcript(&read(&a.reference)?)?;
    let session_id = single_session(reference.iter().map(|r| &r.id))?;

    let aligned = align_session(&session_id, &words, &reference, Some(audio.duration_s()))?;
    info!(
        "{session_id}: {} ASR tokens, cost {}, score {:.4}",
        aligned.ops.iter().filter(|o| o.asr_index.is_some()).count(),
        aligned.cost,
        aligned.session_score
    );
    let score = aligned.session_score;
    let (kept, decision) = apply_qc(aligned.utterances, min_score, scope);
    if let QcDecision::Exclude(reason) = decision {
        return Err(CliError::Invalid(format!(
            "{session_id} excluded: {reason}"
        )));
    }
    write(&a.out, to_jsonl(&kept))?;
    println!(
        "{session_id}: {} utterances, alignment score {score:.4} -> {}",
        kept.len(),
        a.out.display()
    );
    Ok(())
}

pub fn segment(a: SegmentArgs) -> Result<(), CliError> {
    let audio = read_wav(&read(&a.audio)?)?;
    let aligned: Vec<AlignedUtterance> = from_jsonl(&read(&a.aligned)?)?;
    let session_id = single_session(aligned.iter().map(|u| &u.id))?;
    let clips = write_clips(&a.out_dir, &audio, &aligned)?;
    write(&aligned_path(&a.out_dir, &session_id), to_jsonl(&aligned))?;
    println!(
        "{session_id}: {} clips -> {}",
        clips.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let ds = Dataset::load(dir)?;
    if ds.evaluable().next().is_none() {
        return Err(CliError::Invalid(format!(
            "{}: no client utterances with gold codes",
            dir.display()
        )));
    }
    Ok(ds)
}

/// `<dataset>/mock_script.json` when present, otherwise a script derived
/// from the gold codes.
fn mock_script(dataset_dir: &Path, ds: &Dataset) -> Result<MockScript, CliError> {
    let path = dataset_dir.join(MOCK_SCRIPT_FILE);
    if path.exists() {
        return MockScript::from_json(&read(&path)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())));
    }
    let gold: Vec<_> = ds.evaluable().map(|(i, g)| (&i.aligned.id, g)).collect();
    Ok(MockScript::from_gold(
        gold,
        defaults::SAMPLES_PER_PROMPT,
        defaults::MOCK_FLIP_RATE,
    ))
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

fn build_backend(
    kind: BackendKind,
    replay_only: bool,
    file: &FileConfig,
    dataset_dir: &Path,
    ds: &Dataset,
) -> Result<Arc<dyn Backend>, CliError> {
    let model_id = env("ALM_MODEL_ID").or_else(|| file.model_id.clone());
    match kind {
        BackendKind::Mock => Ok(Arc::new(MockBackend::new(mock_script(dataset_dir, ds)?))),
        BackendKind::Live if !replay_only => {
            let base = env("ALM_BASE_URL")
                .ok_or_else(|| CliError::Invalid("ALM_BASE_URL is not set".into()))?;
            let model = model_id.ok_or_else(|| {
                CliError::Invalid("ALM_MODEL_ID is not set and the config has no model_id".into())
            })?;
            Ok(Arc::new(HttpBackend::new(&base, env("ALM_API_KEY"), model)))
        }
        // Replaying never reaches a backend; only the model id matters for
        // cache keys. Without one, fall back to the id the mock backend would
        // use for this dataset so mock runs can be replayed.
        _ => {
            let model = match model_id {
                Some(m) => m,
                None => MockBackend::new(mock_script(dataset_dir, ds)?)
                    .model_id()
                    .to_string(),
            };
            Ok(Arc::new(ReplayBackend::new(model)))
        }
    }
}

fn list_failures(e: &EvalError) {
    if let EvalError::Failed { config, failures } = e {
        for (label, err) in &failures.failures {
            eprintln!("  {config}: {label}: {err}");
        }
    }
}

pub fn experiment(a: RunArgs, grid: bool) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.config.as_deref())?;
    let configs = if grid {
        file.grid()?
    } else {
        vec![file.run_config()?]
    };
    let dataset_dir = a
        .dataset
        .or_else(|| file.dataset.clone())
        .ok_or_else(|| CliError::Invalid("--dataset is required (flag or config key)".into()))?;
    let out_dir = a
        .out_dir
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let cache_dir = a
        .cache_dir
        .or_else(|| file.cache_dir.clone())
        .unwrap_or_else(|| PathBuf::from(defaults::CACHE_DIR));
    let kind = a.backend.or(file.backend).unwrap_or(BackendKind::Live);
    let replay_only =
        a.replay_only || file.replay_only.unwrap_or(false) || kind == BackendKind::Replay;
    let concurrency = a
        .concurrency
        .or(file.concurrency)
        .unwrap_or(defaults::CONCURRENCY);
    if concurrency == 0 {
        return Err(CliError::Invalid("--concurrency must be at least 1".into()));
    }

    let ds = load_dataset(&dataset_dir)?;
    let backend = build_backend(kind, replay_only, &file, &dataset_dir, &ds)?;
    let mode = if replay_only {
        CacheMode::ReplayOnly
    } else {
        CacheMode::ReadWrite
    };
    let gateway = Gateway::new(backend)
        .with_concurrency(concurrency)
        .with_cache(ResponseCache::open(&cache_dir)?, mode);
    info!(
        "{} configuration(s), {} utterances, backend {}",
        configs.len(),
        ds.evaluable().count(),
        gateway.backend_id()
    );

    let runs = run_ablation_suite(&gateway, &ds, &configs);
    write_suite(&out_dir, &gateway, &runs, &configs)?;
    print!("{}", render_markdown(&rows_from_suite(&runs)));

    let mut exit: Option<CliError> = None;
    for run in &runs {
        if let Err(e) = &run.result {
            list_failures(e);
            let msg = format!("{}: {e}", run.name);
            let err = if e.is_backend_failure() {
                CliError::Backend(msg)
            } else {
                CliError::Invalid(msg)
            };
            // A backend failure decides the exit code over a validation failure.
            if !matches!(exit, Some(CliError::Backend(_))) {
                exit = Some(err);
            }
        }
    }
    exit.map_or(Ok(()), Err)
}

pub fn aggregate(a: AggregateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.config.as_deref())?;
    let aggregation = match a.config.config {
        Some(_) => file.run_config()?.aggregation,
        None => Aggregation::SelfConsistency,
    };
    let trajectories: Vec<Trajectory> = from_jsonl(&read(&a.traj)?)?;
    let mut groups: BTreeMap<UtteranceId, Vec<Trajectory>> = BTreeMap::new();
    for t in trajectories {
        groups.entry(t.utterance_id.clone()).or_default().push(t);
    }
    let gold: BTreeMap<UtteranceId, _> = match &a.dataset {
        Some(dir) => Dataset::load(dir)?
            .evaluable()
            .map(|(i, g)| (i.aligned.id.clone(), g))
            .collect(),
        None => BTreeMap::new(),
    };
    let mut predictions: Vec<AggregatedPrediction> = Vec::with_capacity(groups.len());
    for (id, group) in &groups {
        if aggregation == Aggregation::Single && group.len() != 1 {
            return Err(CliError::Invalid(format!(
                "{id}: single aggregation needs one trajectory, found {}",
                group.len()
            )));
        }
        let mut p = code_utterance(id.clone(), group);
        p.gold_code = gold.get(id).copied();
        predictions.push(p);
    }
    write(&a.out, to_jsonl(&predictions))?;
    println!("{} predictions -> {}", predictions.len(), a.out.display());
    Ok(())
}

fn evaluate_file(
    path: &Path,
    file: &FileConfig,
) -> Result<mmsc_core::eval::MetricsReport, CliError> {
    let predictions: Vec<AggregatedPrediction> = from_jsonl(&read(path)?)?;
    if predictions.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no predictions",
            path.display()
        )));
    }
    evaluate_predictions(&predictions, file.unresolved_as())
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.config.as_deref())?;
    let m = evaluate_file(&a.pred, &file)?;
    let json = serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n";
    eprintln!(
        "accuracy {} macro-F1 {} (n = {}, unresolved {})",
        percent(m.accuracy),
        percent(m.macro_f1),
        m.n,
        m.unresolved_mapped
    );
    match &a.out {
        Some(out) => write(out, json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

pub fn report(a: ReportArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.config.config.as_deref())?;
    let mut names: Vec<String> = fs::read_dir(&a.out_dir)
        .map_err(|e| DatasetError::io(&a.out_dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()?
                .strip_suffix(PRED_SUFFIX)
                .map(str::to_string)
        })
        .collect();
    if names.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no *{PRED_SUFFIX} files",
            a.out_dir.display()
        )));
    }
    // Built-in configurations first, in grid order, then the rest by name.
    names.sort_by_key(|n| {
        let pos = BUILTIN_NAMES
            .iter()
            .position(|b| b == n)
            .unwrap_or(BUILTIN_NAMES.len());
        (pos, n.clone())
    });
    let mut rows = Vec::with_capacity(names.len());
    for name in names {
        let path = a.out_dir.join(format!("{name}{PRED_SUFFIX}"));
        rows.push(match evaluate_file(&path, &file) {
            Ok(m) => ReportRow::complete(&name, m),
            Err(e) => {
                warn!("{e}");
                ReportRow::failed(&name, e)
            }
        });
    }
    write_report(&a.out_dir, &rows)?;
    print!("{}", render_markdown(&rows));
    Ok(())
}

pub fn mock_backend(a: MockBackendArgs) -> Result<(), CliError> {
    let script = match (&a.script, &a.dataset) {
        (Some(path), _) => MockScript::from_json(&read(path)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        (None, Some(dir)) => mock_script(dir, &load_dataset(dir)?)?,
        (None, None) => {
            return Err(CliError::Invalid(
                "--script or --dataset is required".into(),
            ))
        }
    };
    let server = MockServer::start(script, &a.addr)?;
    println!("{}", server.base_url());
    eprintln!("serving scripted responses; set ALM_BASE_URL to the URL above");
    server.wait();
    Ok(())
}
