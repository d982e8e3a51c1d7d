//! Run configuration read from TOML.
//!
//! Every key is optional. A command-line flag beats the file, and the file
//! beats the built-in default.
//!
//! | key                     | default            | flag          |
//! |-------------------------|--------------------|---------------|
//! | `seed`                  | scene seed / 1     | `--seed`      |
//! | `out`                   | `out`              | `--out`       |
//! | `tol_sigma_mult`        | 4.0                |               |
//! | `planner.budget`        | 10000              | `--budget`    |
//! | `planner.c`             | sqrt 2             |               |
//! | `planner.width`         | 8                  |               |
//! | `planner.pose_tries`    | 64                 |               |
//! | `planner.relocation_tries` | 64              |               |
//! | `patterns.file`         | none               |               |
//! | `patterns.sigma`        | per pattern        |               |
//! | `patterns.delta`        | per pattern        |               |
//! | `bench.*`               | see `BenchConfig`  | `--tasks`     |
//! | `eval.seed_offsets`     | `[0]`              |               |
//! | `eval.jobs`             | 1                  | `--jobs`      |
//! | `llm.endpoint`          | none               | `--llm-endpoint` |
//! | `llm.model`             | `gpt-4o-mini`      | `--llm-model` |

use std::path::{Path, PathBuf};

use lgplan_core::bench::BenchConfig;
use lgplan_core::geometry::Workspace;
use lgplan_core::patterns::PatternDb;
use lgplan_core::planner::PlannerConfig;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol_sigma_mult: Option<f64>,
    pub planner: PlannerConfig,
    pub patterns: PatternSettings,
    pub bench: BenchConfig,
    pub eval: EvalSettings,
    pub llm: LlmSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternSettings {
    /// JSON list of per-pattern overrides.
    pub file: Option<PathBuf>,
    /// Noise scale applied to every pattern.
    pub sigma: Option<f64>,
    /// Second-object radius applied to every pattern.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub seed_offsets: Option<Vec<u64>>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::config(format!(
                "{name} must be positive, got {x}"
            ))),
            _ => Ok(()),
        };
        positive("tol_sigma_mult", self.tol_sigma_mult)?;
        positive("patterns.sigma", self.patterns.sigma)?;
        positive("patterns.delta", self.patterns.delta)?;
        self.planner
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        self.bench
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.eval.jobs == Some(0) {
            return Err(CliError::config("eval.jobs must be at least 1"));
        }
        if self.eval.seed_offsets.as_ref().is_some_and(Vec::is_empty) {
            return Err(CliError::config("eval.seed_offsets must not be empty"));
        }
        Ok(())
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn tol(&self) -> f64 {
        self.tol_sigma_mult
            .unwrap_or(lgplan_core::executor::DEFAULT_TOL_SIGMA)
    }

    /// Built-in priors for `ws` with the configured overrides applied.
    pub fn pattern_db(&self, ws: &Workspace) -> Result<PatternDb, CliError> {
        let mut db = match &self.patterns.file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
                PatternDb::from_json(&text, ws)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            }
            None => PatternDb::builtin(ws),
        };
        if let Some(s) = self.patterns.sigma {
            db.set_sigma(s);
        }
        if let Some(d) = self.patterns.delta {
            db.set_delta(d);
        }
        Ok(db)
    }
}
