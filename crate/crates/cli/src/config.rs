//! Declarative run configuration. Command-line flags override file values,
//! which override the built-in defaults in `mmsc_core::defaults`.

use std::fs;
use std::path::{Path, PathBuf};

use mmsc_core::align::QcScope;
use mmsc_core::defaults;
use mmsc_core::eval::{Aggregation, RunConfig};
use mmsc_core::gateway::{Modality, PromptId};
use mmsc_core::MiCode;
use serde::Deserialize;

use crate::args::BackendKind;
use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub name: Option<String>,
    pub prompts: Option<Vec<PromptId>>,
    pub modality: Option<Modality>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub samples_per_prompt: Option<u32>,
    pub aggregation: Option<Aggregation>,
    pub unresolved_as: Option<MiCode>,
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub concurrency: Option<usize>,
    pub replay_only: Option<bool>,
    pub model_id: Option<String>,
    pub min_score: Option<f64>,
    pub qc_scope: Option<QcScope>,
}

impl FileConfig {
    /// `arg` is a path to a TOML file or the name of a built-in configuration.
    pub fn load(arg: Option<&str>) -> Result<Self, CliError> {
        let Some(arg) = arg else {
            return Ok(Self::default());
        };
        let path = Path::new(arg);
        if !path.exists() && RunConfig::builtin(arg).is_some() {
            return Ok(Self {
                name: Some(arg.to_string()),
                ..Self::default()
            });
        }
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    /// A built-in configuration named by `name`, else `mm-sc-audio` renamed,
    /// with the experiment keys applied on top.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let name = self.name.clone().unwrap_or_else(|| "mm-sc-audio".into());
        let mut cfg = RunConfig::builtin(&name).unwrap_or_else(|| {
            let mut c = RunConfig::builtin("mm-sc-audio").expect("built-in");
            c.name = name.clone();
            c
        });
        self.apply_overrides(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply every experiment key present in the file.
    pub fn apply_overrides(&self, cfg: &mut RunConfig) {
        if let Some(p) = &self.prompts {
            cfg.prompts = p.clone();
        }
        if let Some(m) = self.modality {
            cfg.modality = m;
        }
        if let Some(t) = self.temperature {
            cfg.sampling.temperature = t;
        }
        if let Some(p) = self.top_p {
            cfg.sampling.top_p = p;
        }
        if let Some(n) = self.samples_per_prompt {
            cfg.sampling.samples_per_prompt = n;
        }
        if let Some(a) = self.aggregation {
            cfg.aggregation = a;
        }
        if let Some(u) = self.unresolved_as {
            cfg.unresolved_as = u;
        }
    }

    /// The built-in grid with sampling and scoring keys applied. Keys that
    /// define a single configuration are rejected; the sample count only
    /// touches self-consistency entries.
    pub fn grid(&self) -> Result<Vec<RunConfig>, CliError> {
        if self.name.is_some()
            || self.prompts.is_some()
            || self.modality.is_some()
            || self.aggregation.is_some()
        {
            return Err(CliError::Invalid(
                "ablate runs the built-in grid; name, prompts, modality and aggregation cannot be set".into(),
            ));
        }
        let mut grid = RunConfig::builtins();
        for cfg in &mut grid {
            if let Some(t) = self.temperature {
                cfg.sampling.temperature = t;
            }
            if let Some(p) = self.top_p {
                cfg.sampling.top_p = p;
            }
            if let (Some(n), Aggregation::SelfConsistency) =
                (self.samples_per_prompt, cfg.aggregation)
            {
                cfg.sampling.samples_per_prompt = n;
            }
            if let Some(u) = self.unresolved_as {
                cfg.unresolved_as = u;
            }
            cfg.validate()?;
        }
        Ok(grid)
    }

    pub fn unresolved_as(&self) -> MiCode {
        self.unresolved_as.unwrap_or(MiCode::Fn)
    }

    pub fn min_score(&self, flag: Option<f64>) -> Result<f64, CliError> {
        let v = flag
            .or(self.min_score)
            .unwrap_or(defaults::MIN_SESSION_SCORE);
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(CliError::Invalid(format!("--min-score {v} outside [0, 1]")))
        }
    }
}
