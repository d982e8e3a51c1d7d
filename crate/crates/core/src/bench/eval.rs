//! Running the planner over a suite and aggregating success rates.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gen::TaskInstance;
use super::BenchError;
use crate::executor::{check_goal, replay, DEFAULT_TOL_SIGMA};
use crate::patterns::PatternDb;
use crate::planner::{mcts_plan, pmcts_plan, PlanError, PlannerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Search over pattern priors.
    Lgmcts,
    /// Search with the witness poses given as exact goals.
    Pmcts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub planner: PlannerConfig,
    pub mode: Mode,
    /// Each task runs once per offset, with planner seed
    /// `instance_seed + offset`.
    pub seed_offsets: Vec<u64>,
    pub tol_sigma_mult: f64,
    /// Worker threads; 1 runs inline.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            planner: PlannerConfig::default(),
            mode: Mode::Lgmcts,
            seed_offsets: vec![0],
            tol_sigma_mult: DEFAULT_TOL_SIGMA,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub instance_seed: u64,
    pub planner_seed: u64,
    pub tags: Vec<String>,
    pub planned: bool,
    pub executed: bool,
    pub goal_met: bool,
    pub steps_used: usize,
    pub plan_length: usize,
    pub wall_ms: u64,
}

impl TaskOutcome {
    pub fn success(&self) -> bool {
        self.planned && self.executed && self.goal_met
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub budget: usize,
    pub runs: usize,
    pub sr_p: f64,
    pub sr_ep: f64,
    pub outcomes: Vec<TaskOutcome>,
}

impl BenchReport {
    fn from_outcomes(mode: Mode, budget: usize, mut outcomes: Vec<TaskOutcome>) -> BenchReport {
        outcomes.sort_by_key(|o| (o.instance_seed, o.planner_seed));
        let n = outcomes.len().max(1) as f64;
        let sr_p = outcomes.iter().filter(|o| o.planned).count() as f64 / n;
        let sr_ep = outcomes.iter().filter(|o| o.success()).count() as f64 / n;
        BenchReport {
            mode,
            budget,
            runs: outcomes.len(),
            sr_p,
            sr_ep,
            outcomes,
        }
    }

    /// Restrict to outcomes whose task carries `tag`.
    pub fn filter_tag(&self, tag: &str) -> BenchReport {
        let kept = self
            .outcomes
            .iter()
            .filter(|o| o.tags.iter().any(|t| t == tag))
            .cloned()
            .collect();
        BenchReport::from_outcomes(self.mode, self.budget, kept)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with every `wall_ms` zeroed, for comparing runs.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        r.outcomes.iter_mut().for_each(|o| o.wall_ms = 0);
        r.to_json()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "seed",
            "planner_seed",
            "tags",
            "planned",
            "executed",
            "goal_met",
            "steps",
            "wall_ms",
        ])
        .expect("in-memory write");
        for o in &self.outcomes {
            w.write_record([
                o.instance_seed.to_string(),
                o.planner_seed.to_string(),
                o.tags.join("+"),
                o.planned.to_string(),
                o.executed.to_string(),
                o.goal_met.to_string(),
                o.steps_used.to_string(),
                o.wall_ms.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn summary(&self) -> String {
        format!(
            "mode={} budget={} runs={} SR_p={:.3} SR_ep={:.3}",
            match self.mode {
                Mode::Lgmcts => "lgmcts",
                Mode::Pmcts => "pmcts",
            },
            self.budget,
            self.runs,
            self.sr_p,
            self.sr_ep
        )
    }
}

/// Plan, replay and verify one task with one planner seed.
pub fn run_task(task: &TaskInstance, config: &EvalConfig, offset: u64) -> TaskOutcome {
    let db = PatternDb::builtin(task.scene.workspace());
    let seed = task.instance_seed.wrapping_add(offset);
    let start = Instant::now();
    let result = match config.mode {
        Mode::Lgmcts => mcts_plan(&task.scene, &task.goal, &db, &config.planner, seed),
        Mode::Pmcts => pmcts_plan(&task.scene, &task.fixed_goal_poses(), &config.planner, seed),
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    let tags = task.tags.iter().map(|t| t.as_str().to_string()).collect();
    let mut out = TaskOutcome {
        instance_seed: task.instance_seed,
        planner_seed: seed,
        tags,
        planned: false,
        executed: false,
        goal_met: false,
        steps_used: 0,
        plan_length: 0,
        wall_ms,
    };
    match result {
        Ok(plan) => {
            let report = replay(&task.scene, &plan);
            out.planned = true;
            out.executed = report.ok;
            out.goal_met = report.ok
                && check_goal(&report.final_scene, &task.goal, &db, config.tol_sigma_mult).ok;
            out.steps_used = plan.steps_used;
            out.plan_length = plan.actions.len();
        }
        Err(PlanError::Failed(f)) => out.steps_used = f.steps_used,
        Err(_) => {}
    }
    out
}

pub fn evaluate(suite: &[TaskInstance], config: &EvalConfig) -> Result<BenchReport, BenchError> {
    if suite.is_empty() {
        return Err(BenchError::Config("suite is empty".into()));
    }
    if config.seed_offsets.is_empty() {
        return Err(BenchError::Config("seed_offsets is empty".into()));
    }
    config
        .planner
        .validate()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let jobs: Vec<(&TaskInstance, u64)> = suite
        .iter()
        .flat_map(|t| config.seed_offsets.iter().map(move |&o| (t, o)))
        .collect();
    let outcomes: Vec<TaskOutcome> = if config.jobs <= 1 {
        jobs.iter().map(|&(t, o)| run_task(t, config, o)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        pool.install(|| {
            jobs.par_iter()
                .map(|&(t, o)| run_task(t, config, o))
                .collect()
        })
    };
    Ok(BenchReport::from_outcomes(
        config.mode,
        config.planner.budget,
        outcomes,
    ))
}
