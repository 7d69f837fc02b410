use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmsc_core::align::QcScope;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "mmsc",
    version,
    about = "Code client utterances of counseling sessions as change talk, sustain talk or follow/neutral with an audio-language model",
    after_help = "Exit status: 0 success, 1 invalid input or configuration, 2 backend failure (including cache misses in replay mode).\n\
Environment: ALM_BASE_URL, ALM_API_KEY, ALM_MODEL_ID configure the live backend. RUST_LOG overrides the log level."
)]
pub struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align a reference transcript to ASR word timestamps and apply session QC
    Align(AlignArgs),
    /// Cut one WAV clip per aligned utterance into a dataset directory
    Segment(SegmentArgs),
    /// Run one experiment configuration over a dataset
    Run(RunArgs),
    /// Recompute predictions from a trajectory log
    Aggregate(AggregateArgs),
    /// Score a predictions file against the gold codes it carries
    Evaluate(EvaluateArgs),
    /// Run the built-in comparison grid (baselines, modalities, prompt ablations)
    Ablate(RunArgs),
    /// Rebuild report.csv and report.md from the prediction files in a directory
    Report(ReportArgs),
    /// Serve a scripted chat-completions endpoint for offline testing
    MockBackend(MockBackendArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// HTTP chat-completions endpoint from ALM_BASE_URL
    Live,
    /// In-process scripted responses
    Mock,
    /// Cache only; any miss fails the run
    Replay,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML config file, or the name of a built-in configuration
    #[arg(long, value_name = "FILE|NAME")]
    pub config: Option<String>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Session recording (PCM WAV)
    #[arg(long)]
    pub audio: PathBuf,
    /// ASR words with timestamps ({"words":[{text,start,end}]})
    #[arg(long)]
    pub asr: PathBuf,
    /// Reference transcript, one JSON utterance per line, one session
    #[arg(long = "ref", value_name = "REF")]
    pub reference: PathBuf,
    /// Output *.aligned.jsonl
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum alignment score to keep the session [default: 0.6]
    #[arg(long)]
    pub min_score: Option<f64>,
    /// Drop the whole session or only weakly covered utterances [default: session]
    #[arg(long, value_enum)]
    pub qc_scope: Option<QcScopeArg>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QcScopeArg {
    Session,
    Utterance,
}

impl From<QcScopeArg> for QcScope {
    fn from(a: QcScopeArg) -> Self {
        match a {
            QcScopeArg::Session => QcScope::Session,
            QcScopeArg::Utterance => QcScope::Utterance,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Session recording (PCM WAV)
    #[arg(long)]
    pub audio: PathBuf,
    /// Aligned utterances produced by `align`
    #[arg(long)]
    pub aligned: PathBuf,
    /// Dataset directory; receives <session>.aligned.jsonl and <session>/<index>.wav
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory written by `segment`
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Where trajectories, predictions, reports and the manifest go [default: out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Response source [default: live]
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Serve every request from the cache; a miss fails the run
    #[arg(long)]
    pub replay_only: bool,
    /// Maximum requests in flight [default: 4]
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Response cache directory [default: cache]
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Trajectory log (*.traj.jsonl)
    #[arg(long)]
    pub traj: PathBuf,
    /// Output predictions (*.pred.jsonl)
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset directory to take gold codes from
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions with gold codes (*.pred.jsonl)
    #[arg(long)]
    pub pred: PathBuf,
    /// Write the metrics JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding *.pred.jsonl files; the report is written next to them
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct MockBackendArgs {
    /// Dataset whose gold codes seed the script (uses <dataset>/mock_script.json when present)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Explicit script file
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Listen address
    #[arg(long, default_value = "127.0.0.1:8089")]
    pub addr: String,
}
