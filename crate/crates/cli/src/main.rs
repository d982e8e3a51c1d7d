//! `lgplan`: plan, replay, check, benchmark and draw tabletop rearrangements.
//!
//! Exit codes: 0 success, 1 bad input or planning failure, 2 the plan does
//! not replay, 3 the final scene misses the goal. On failure stderr holds
//! exactly one JSON object.

mod config;
mod llm_http;
mod viz;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgplan_core::bench::{evaluate, gen_suite, EvalConfig, Mode};
use lgplan_core::executor::{check_goal, replay, ReplayReport};
use lgplan_core::geometry::Pose;
use lgplan_core::instruction::llm::{
    llm_parse, CompletionClient, Fixture, LlmError, RecordingClient, ReplayClient,
};
use lgplan_core::instruction::{
    parse_dsl_for_scene, resolve_pattern_key, validate, GoalError, GoalSpec,
};
use lgplan_core::patterns::{Anchor, PatternDb, SamplingContext};
use lgplan_core::planner::{mcts_plan, Plan, PlanError};
use lgplan_core::scene::{ObjectId, Scene};
use serde_json::{json, Map, Value};

use config::RunConfig;
use llm_http::HttpClient;

#[derive(Debug, Parser)]
#[command(
    name = "lgplan",
    version,
    about = "Language-guided tabletop rearrangement planner"
)]
struct Cli {
    /// Planner seed (plan) or suite seed (bench, gen). Falls back to the
    /// config, then to the scene's seed (plan) or `bench.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Plan a goal on a scene, replay the plan and check the result.
    Plan(PlanArgs),
    /// Replay a plan on a scene.
    Replay(ReplayArgs),
    /// Check a scene, or a scene after a plan, against a goal.
    Check(CheckArgs),
    /// Generate a suite and report success rates.
    Bench(BenchArgs),
    /// Generate a suite and write each task to disk.
    Gen(GenArgs),
    /// Draw a scene, a plan over it, or a prior density.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
struct GoalArgs {
    /// Goal text, or a file holding goal text or GoalSpec JSON (`.json`).
    #[arg(long, required_unless_present = "llm", conflicts_with = "llm")]
    goal: Option<String>,
    /// Free-form request sent to a language model; needs LGPLAN_LLM_KEY
    /// unless answered from --llm-fixture.
    #[arg(long)]
    llm: Option<String>,
    /// Answer --llm from recorded exchanges instead of the network.
    #[arg(long, requires = "llm")]
    llm_fixture: Option<PathBuf>,
    /// Save the exchanges of a live --llm call here.
    #[arg(long, requires = "llm", conflicts_with = "llm_fixture")]
    llm_record: Option<PathBuf>,
    /// Chat-completions URL (overrides `llm.endpoint`).
    #[arg(long, requires = "llm")]
    llm_endpoint: Option<String>,
    /// Model name (overrides `llm.model`).
    #[arg(long, requires = "llm")]
    llm_model: Option<String>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    scene: PathBuf,
    #[command(flatten)]
    goal: GoalArgs,
    /// Simulation step cap (overrides `planner.budget`).
    #[arg(long)]
    budget: Option<usize>,
    /// Also write one SVG per step.
    #[arg(long)]
    frames: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    scene: PathBuf,
    plan: PathBuf,
}

#[derive(Debug, Args)]
struct CheckArgs {
    scene: PathBuf,
    /// Goal text or file.
    #[arg(long)]
    goal: String,
    /// Replay this plan first.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Number of tasks (overrides `bench.tasks`).
    #[arg(long)]
    tasks: Option<usize>,
    /// Worker threads (overrides `eval.jobs`).
    #[arg(long)]
    jobs: Option<usize>,
    /// Simulation step cap (overrides `planner.budget`).
    #[arg(long)]
    budget: Option<usize>,
    /// Plan toward each task's stored witness poses instead of the priors.
    #[arg(long)]
    pmcts: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of tasks (overrides `bench.tasks`).
    #[arg(long)]
    tasks: Option<usize>,
}

#[derive(Debug, Args)]
struct VizArgs {
    scene: PathBuf,
    /// Draw this plan's steps as numbered arrows.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Shade the density of this pattern as a grayscale grid.
    #[arg(long)]
    prior: Option<String>,
    /// Poses already drawn for the pattern, `x,y;x,y;...`.
    #[arg(long, requires = "prior", allow_hyphen_values = true)]
    sampled: Option<String>,
    /// Anchor object for a spatial pattern, e.g. `o3`.
    #[arg(long, requires = "prior")]
    anchor: Option<String>,
    /// Objects in the pattern (default: sampled poses + 1, at least 3).
    #[arg(long, requires = "prior")]
    total: Option<usize>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "viz.svg")]
    name: String,
}

/// A failure with its exit code and the JSON object printed to stderr.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    body: Map<String, Value>,
}

impl CliError {
    fn new(code: u8, kind: &str, message: impl Into<String>) -> CliError {
        let mut body = Map::new();
        body.insert("error".into(), json!(kind));
        body.insert("message".into(), json!(message.into()));
        CliError { code, body }
    }

    fn with(mut self, key: &str, value: Value) -> CliError {
        self.body.insert(key.into(), value);
        self
    }

    pub fn config(message: impl Into<String>) -> CliError {
        CliError::new(1, "config", message)
    }

    pub fn io(path: &Path, e: &std::io::Error) -> CliError {
        CliError::new(1, "io", format!("{}: {e}", path.display())).with("path", json!(path))
    }

    fn input(kind: &str, path: &Path, message: impl std::fmt::Display) -> CliError {
        CliError::new(1, kind, format!("{}: {message}", path.display())).with("path", json!(path))
    }

    fn goal(e: &GoalError) -> CliError {
        let mut err = CliError::new(1, "goal", e.to_string());
        if let Some((line, column)) = e.position() {
            err = err.with("line", json!(line)).with("column", json!(column));
        }
        err
    }

    fn llm(e: LlmError) -> CliError {
        let err = CliError::new(1, "llm", e.to_string());
        match e {
            LlmError::NonConforming { reply, .. } => err.with("reply", json!(reply)),
            _ => err,
        }
    }

    fn plan(e: PlanError) -> CliError {
        match e {
            PlanError::Failed(f) => CliError::new(
                1,
                "planning_failed",
                format!("planning failed: {}", f.reason),
            )
            .with("steps_used", json!(f.steps_used))
            .with("best_reward", json!(f.best_reward))
            .with("total", json!(f.total)),
            PlanError::Goal(g) => CliError::goal(&g),
            PlanError::Config(m) => CliError::config(m),
            other => CliError::new(1, "plan", other.to_string()),
        }
    }

    fn replay(report: &ReplayReport) -> CliError {
        CliError::new(2, "replay", "plan does not replay")
            .with("failed_step", json!(report.failed_step))
            .with("reason", json!(report.reason))
    }

    fn unmet(check: &lgplan_core::executor::GoalCheck) -> CliError {
        CliError::new(3, "goal_not_met", "final scene does not meet the goal")
            .with("subgoals", json!(check.subgoals))
            .with("collision_free", json!(check.collision_free))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::new(1, "usage", e.to_string().trim_end());
            eprintln!("{}", Value::Object(err.body));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", Value::Object(e.body));
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let out = cfg.out_dir(cli.out.as_deref());
    match cli.cmd {
        Cmd::Plan(a) => cmd_plan(&cfg, cli.seed, &out, a),
        Cmd::Replay(a) => cmd_replay(&out, a),
        Cmd::Check(a) => cmd_check(&cfg, a),
        Cmd::Bench(a) => cmd_bench(&cfg, cli.seed, &out, a),
        Cmd::Gen(a) => cmd_gen(&cfg, cli.seed, &out, a),
        Cmd::Viz(a) => cmd_viz(&cfg, &out, a),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, &e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, &e))?;
    Ok(path)
}

fn load_scene(path: &Path) -> Result<Scene, CliError> {
    Scene::from_json(&read(path)?).map_err(|e| CliError::input("scene", path, e))
}

fn load_plan(path: &Path) -> Result<Plan, CliError> {
    Plan::from_json(&read(path)?).map_err(|e| CliError::input("plan", path, e))
}

/// Goal text, or the contents of the file it names.
fn load_goal(arg: &str, scene: &Scene, db: &PatternDb) -> Result<GoalSpec, CliError> {
    let path = Path::new(arg);
    if !path.is_file() {
        return parse_dsl_for_scene(arg, db, scene).map_err(|e| CliError::goal(&e));
    }
    let text = read(path)?;
    let goal = if path.extension().is_some_and(|e| e == "json") {
        GoalSpec::from_json(&text).map_err(|e| CliError::goal(&e))?
    } else {
        parse_dsl_for_scene(&text, db, scene).map_err(|e| CliError::goal(&e))?
    };
    validate(&goal, scene, db).map_err(|e| CliError::goal(&e))?;
    Ok(goal)
}

fn goal_from_args(
    cfg: &RunConfig,
    args: &GoalArgs,
    scene: &Scene,
    db: &PatternDb,
) -> Result<GoalSpec, CliError> {
    let Some(request) = &args.llm else {
        let text = args.goal.as_deref().expect("clap requires --goal or --llm");
        return load_goal(text, scene, db);
    };
    if let Some(path) = &args.llm_fixture {
        let fixture = Fixture::load(path).map_err(CliError::llm)?;
        return llm_parse(request, scene, db, &mut ReplayClient::new(fixture))
            .map_err(CliError::llm);
    }
    let endpoint = args
        .llm_endpoint
        .clone()
        .or_else(|| cfg.llm.endpoint.clone())
        .ok_or_else(|| CliError::config("--llm needs --llm-endpoint or llm.endpoint"))?;
    let model = args
        .llm_model
        .clone()
        .or_else(|| cfg.llm.model.clone())
        .unwrap_or_else(|| config::DEFAULT_MODEL.to_string());
    let key = HttpClient::key_from_env().map_err(CliError::llm)?;
    let client = HttpClient::new(&endpoint, &model, key);
    match &args.llm_record {
        Some(path) => {
            let mut rec = RecordingClient::new(client);
            let result = llm_parse(request, scene, db, &mut rec);
            rec.fixture.save(path).map_err(CliError::llm)?;
            result.map_err(CliError::llm)
        }
        None => {
            let mut client = client;
            llm_parse(request, scene, db, &mut client as &mut dyn CompletionClient)
                .map_err(CliError::llm)
        }
    }
}

fn cmd_plan(cfg: &RunConfig, seed: Option<u64>, out: &Path, a: PlanArgs) -> Result<(), CliError> {
    let scene = load_scene(&a.scene)?;
    let db = cfg.pattern_db(scene.workspace())?;
    let goal = goal_from_args(cfg, &a.goal, &scene, &db)?;
    let mut planner = cfg.planner.clone();
    if let Some(b) = a.budget {
        planner.budget = b;
    }
    let seed = seed.or(cfg.seed).unwrap_or(scene.seed());
    let plan = mcts_plan(&scene, &goal, &db, &planner, seed).map_err(CliError::plan)?;
    write(out, "plan.json", &(plan.to_json() + "\n"))?;
    write(
        out,
        "goal.txt",
        &(lgplan_core::instruction::render_dsl(&goal) + "\n"),
    )?;
    let report = replay(&scene, &plan);
    write(out, "replay.json", &(report.to_json() + "\n"))?;
    if a.frames {
        for (i, svg) in viz::frames(&scene, &plan).iter().enumerate() {
            write(out, &format!("frame_{i:03}.svg"), svg)?;
        }
    }
    if !report.ok {
        return Err(CliError::replay(&report));
    }
    let check = check_goal(&report.final_scene, &goal, &db, cfg.tol());
    if !check.ok {
        return Err(CliError::unmet(&check));
    }
    println!(
        "planned {} actions in {} steps (seed {seed}); replay ok; goal met; wrote {}",
        plan.actions.len(),
        plan.steps_used,
        out.display()
    );
    Ok(())
}

fn cmd_replay(out: &Path, a: ReplayArgs) -> Result<(), CliError> {
    let scene = load_scene(&a.scene)?;
    let plan = load_plan(&a.plan)?;
    let report = replay(&scene, &plan);
    write(out, "replay.json", &(report.to_json() + "\n"))?;
    if !report.ok {
        return Err(CliError::replay(&report));
    }
    println!("replayed {} actions", plan.actions.len());
    Ok(())
}

fn cmd_check(cfg: &RunConfig, a: CheckArgs) -> Result<(), CliError> {
    let mut scene = load_scene(&a.scene)?;
    let db = cfg.pattern_db(scene.workspace())?;
    let goal = load_goal(&a.goal, &scene, &db)?;
    if let Some(p) = &a.plan {
        let report = replay(&scene, &load_plan(p)?);
        if !report.ok {
            return Err(CliError::replay(&report));
        }
        scene = report.final_scene;
    }
    let check = check_goal(&scene, &goal, &db, cfg.tol());
    println!(
        "{}",
        serde_json::to_string(&check).expect("check serializes")
    );
    if !check.ok {
        return Err(CliError::unmet(&check));
    }
    Ok(())
}

fn bench_config(
    cfg: &RunConfig,
    seed: Option<u64>,
    tasks: Option<usize>,
) -> Result<lgplan_core::bench::BenchConfig, CliError> {
    let mut bc = cfg.bench.clone();
    if let Some(s) = seed.or(cfg.seed) {
        bc.seed = s;
    }
    if let Some(t) = tasks {
        bc.tasks = t;
    }
    bc.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(bc)
}

fn cmd_bench(cfg: &RunConfig, seed: Option<u64>, out: &Path, a: BenchArgs) -> Result<(), CliError> {
    let bc = bench_config(cfg, seed, a.tasks)?;
    let mut ec = EvalConfig {
        planner: cfg.planner.clone(),
        mode: if a.pmcts { Mode::Pmcts } else { Mode::Lgmcts },
        tol_sigma_mult: cfg.tol(),
        ..EvalConfig::default()
    };
    if let Some(o) = &cfg.eval.seed_offsets {
        ec.seed_offsets = o.clone();
    }
    if let Some(j) = a.jobs.or(cfg.eval.jobs) {
        if j == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        ec.jobs = j;
    }
    if let Some(b) = a.budget {
        ec.planner.budget = b;
    }
    ec.planner
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    let suite = gen_suite(&bc).map_err(|e| CliError::config(e.to_string()))?;
    let report = evaluate(&suite, &ec).map_err(|e| CliError::config(e.to_string()))?;
    write(out, "report.json", &(report.to_json() + "\n"))?;
    write(out, "report.csv", &report.to_csv())?;
    println!("{}", report.summary());
    Ok(())
}

fn cmd_gen(cfg: &RunConfig, seed: Option<u64>, out: &Path, a: GenArgs) -> Result<(), CliError> {
    let bc = bench_config(cfg, seed, a.tasks)?;
    let suite = gen_suite(&bc).map_err(|e| CliError::config(e.to_string()))?;
    for task in &suite {
        write(
            out,
            &format!("task_{}.json", task.instance_seed),
            &(task.to_json() + "\n"),
        )?;
    }
    println!("wrote {} tasks to {}", suite.len(), out.display());
    Ok(())
}

fn parse_points(text: &str) -> Result<Vec<Pose>, CliError> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let nums: Vec<f64> = pair
                .split(',')
                .map(|n| n.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::config(format!("bad point `{pair}`: {e}")))?;
            match nums[..] {
                [x, y] => Ok(Pose::planar(x, y, 0.0)),
                _ => Err(CliError::config(format!("point `{pair}` needs x,y"))),
            }
        })
        .collect()
}

fn cmd_viz(cfg: &RunConfig, out: &Path, a: VizArgs) -> Result<(), CliError> {
    let scene = load_scene(&a.scene)?;
    let plan = a.plan.as_deref().map(load_plan).transpose()?;
    let heat = match &a.prior {
        None => None,
        Some(key) => {
            let db = cfg.pattern_db(scene.workspace())?;
            let prior = resolve_pattern_key(key, &db).map_err(|e| CliError::goal(&e))?;
            let sampled = a
                .sampled
                .as_deref()
                .map(parse_points)
                .transpose()?
                .unwrap_or_default();
            let total = a.total.unwrap_or((sampled.len() + 1).max(3));
            if total <= sampled.len() {
                return Err(CliError::config(
                    "--total must exceed the number of sampled poses",
                ));
            }
            let mut ctx =
                SamplingContext::new(prior, *scene.workspace(), total).with_sampled(sampled);
            match (&a.anchor, prior.family.is_spatial()) {
                (Some(name), true) => {
                    let id = name
                        .trim_start_matches(['o', 'O'])
                        .parse::<u32>()
                        .map(ObjectId)
                        .map_err(|_| CliError::config(format!("bad anchor `{name}`")))?;
                    let obj = scene
                        .object(id)
                        .map_err(|e| CliError::config(e.to_string()))?;
                    let pose = scene.pose(id).expect("object exists");
                    ctx = ctx.with_anchor(Anchor::new(pose, &obj.footprint));
                }
                (None, true) => return Err(CliError::config("spatial priors need --anchor")),
                (Some(_), false) => {
                    return Err(CliError::config("--anchor only applies to spatial priors"))
                }
                (None, false) => {}
            }
            Some(viz::Heatmap::of_prior(&ctx))
        }
    };
    let path = write(
        out,
        &a.name,
        &viz::render(&scene, heat.as_ref(), plan.as_ref()),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
