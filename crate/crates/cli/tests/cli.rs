//! Golden-file tests for the `lgplan` binary. Set `UPDATE_GOLDEN=1` to
//! rewrite the stored outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const KITCHEN_GOAL: &str = "behind(o_apple|o_spoon); right(o_cup|o_apple)";

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn lgplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgplan"))
        .args(args)
        .env_remove("LGPLAN_LLM_KEY")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Exit code, plus stderr parsed as the single JSON object it must be.
fn failure(out: &Output) -> (i32, Value) {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    let v: Value = serde_json::from_str(text.trim_end()).expect("stderr is JSON");
    assert!(v.is_object() && v["error"].is_string(), "{v}");
    (out.status.code().unwrap(), v)
}

fn check_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(expected == actual, "{name} differs from its golden file");
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn plan_kitchen(dir: &Path) -> Output {
    let scene = core_fixture("kitchen_scene.json");
    lgplan(&[
        "plan",
        p(&scene),
        "--goal",
        KITCHEN_GOAL,
        "--frames",
        "--out",
        p(dir),
    ])
}

#[test]
fn kitchen_plan_matches_golden() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let out = plan_kitchen(a.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(plan_kitchen(b.path()).status.success());
    let plan: Value = serde_json::from_str(&read(a.path(), "plan.json")).unwrap();
    let kinds: Vec<&str> = plan["actions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["goal_placement", "relocation", "goal_placement"]);
    for name in [
        "plan.json",
        "replay.json",
        "goal.txt",
        "frame_000.svg",
        "frame_001.svg",
        "frame_002.svg",
        "frame_003.svg",
    ] {
        let text = read(a.path(), name);
        assert_eq!(text, read(b.path(), name), "{name} differs between runs");
        check_golden(&format!("kitchen_{name}"), &text);
    }
    assert!(!a.path().join("frame_004.svg").exists());
}

#[test]
fn plan_svg_has_numbered_arrows() {
    let dir = TempDir::new().unwrap();
    assert!(plan_kitchen(dir.path()).status.success());
    let plan = dir.path().join("plan.json");
    let scene = core_fixture("kitchen_scene.json");
    let out = lgplan(&[
        "viz",
        p(&scene),
        "--plan",
        p(&plan),
        "--out",
        p(dir.path()),
        "--name",
        "plan.svg",
    ]);
    assert!(out.status.success());
    let svg = read(dir.path(), "plan.svg");
    assert_eq!(svg.matches("<line ").count(), 3);
    for n in 1..=3 {
        assert!(svg.contains(&format!(">{n}</text>")));
    }
    assert_eq!(svg.matches("<polygon ").count(), 4);
    check_golden("kitchen_plan.svg", &svg);
}

fn prior_svg(extra: &[&str]) -> String {
    let dir = TempDir::new().unwrap();
    let scene = fixture("empty_scene.json");
    let mut args = vec!["viz", p(&scene), "--prior", "line", "--out", p(dir.path())];
    args.extend_from_slice(extra);
    let out = lgplan(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    read(dir.path(), "viz.svg")
}

/// Gray levels of the 64x64 grid, row-major from the top.
fn cells(svg: &str) -> Vec<u8> {
    let grid = &svg[svg.find("<g id=\"prior\"").unwrap()..];
    let grid = &grid[..grid.find("</g>").unwrap()];
    grid.match_indices("fill=\"#")
        .map(|(i, _)| u8::from_str_radix(&grid[i + 7..i + 9], 16).unwrap())
        .collect()
}

#[test]
fn prior_heatmaps() {
    let empty = prior_svg(&[]);
    let c = cells(&empty);
    assert_eq!(c.len(), 64 * 64);
    assert!(c.iter().all(|&g| g == 255), "K=0 is uniform white");
    check_golden("line_prior_k0.svg", &empty);

    let band = prior_svg(&["--sampled", "0.2,0.5;0.4,0.5", "--total", "5"]);
    let c = cells(&band);
    // y = 0.5 falls between rows 31 and 32
    let row_max = |r: usize| c[r * 64..(r + 1) * 64].iter().copied().max().unwrap();
    assert!(row_max(31) > 200 && row_max(32) > 200);
    assert_eq!(row_max(0), 0);
    assert_eq!(row_max(63), 0);
    assert!(c.iter().filter(|&&g| g > 0).count() < 64 * 8);
    check_golden("line_prior_k2.svg", &band);
}

#[test]
fn bad_goal_file_reports_position() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.dsl");
    std::fs::write(&bad, "line(o1,o2,o3);\nleft(o1 o2)\n").unwrap();
    let scene = core_fixture("kitchen_scene.json");
    let out = lgplan(&["plan", p(&scene), "--goal", p(&bad), "--out", p(dir.path())]);
    let (code, err) = failure(&out);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "goal");
    assert_eq!(
        (err["line"].as_u64(), err["column"].as_u64()),
        (Some(2), Some(9))
    );
    assert!(!dir.path().join("plan.json").exists());
}

#[test]
fn tiny_budget_on_crowded_scene_fails_with_best_reward() {
    let dir = TempDir::new().unwrap();
    let scene = fixture("crowded_scene.json");
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--goal",
        "line(o1,o2,o3,o4)",
        "--budget",
        "10",
        "--out",
        p(dir.path()),
    ]);
    let (code, err) = failure(&out);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "planning_failed");
    assert!(err["steps_used"].as_u64().unwrap() <= 10);
    assert!(err["best_reward"].as_u64().unwrap() < err["total"].as_u64().unwrap());
    check_golden("crowded_failure.json", &(err.to_string() + "\n"));
}

#[test]
fn llm_goal_from_fixture() {
    let dir = TempDir::new().unwrap();
    let scene = core_fixture("phones_scene.json");
    let rec = core_fixture("llm_phone_line.json");
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--llm",
        "put all phones into a line",
        "--llm-fixture",
        p(&rec),
        "--out",
        p(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(read(dir.path(), "goal.txt"), "line(o2,o5,o6)\n");
    // a live call needs an endpoint, and the key is never consulted first
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--llm",
        "line up the phones",
        "--out",
        p(dir.path()),
    ]);
    let (code, err) = failure(&out);
    assert_eq!((code, err["error"].as_str()), (1, Some("config")));
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--llm",
        "x",
        "--llm-endpoint",
        "http://127.0.0.1:9/v1",
        "--out",
        p(dir.path()),
    ]);
    let (_, err) = failure(&out);
    assert!(err["message"].as_str().unwrap().contains("LGPLAN_LLM_KEY"));
}

#[test]
fn replay_and_check_exit_codes() {
    let dir = TempDir::new().unwrap();
    assert!(plan_kitchen(dir.path()).status.success());
    let scene = core_fixture("kitchen_scene.json");
    let plan = dir.path().join("plan.json");
    let out = lgplan(&["replay", p(&scene), p(&plan), "--out", p(dir.path())]);
    assert!(out.status.success());
    let out = lgplan(&["check", p(&scene), "--goal", KITCHEN_GOAL, "--plan", p(&plan)]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], true);

    // the start scene does not meet the goal yet
    let (code, err) = failure(&lgplan(&["check", p(&scene), "--goal", KITCHEN_GOAL]));
    assert_eq!((code, err["error"].as_str()), (3, Some("goal_not_met")));

    // dropping the relocation leaves the cup's spot occupied
    let mut v: Value = serde_json::from_str(&read(dir.path(), "plan.json")).unwrap();
    v["actions"].as_array_mut().unwrap().remove(1);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, v.to_string()).unwrap();
    let (code, err) = failure(&lgplan(&[
        "replay",
        p(&scene),
        p(&broken),
        "--out",
        p(dir.path()),
    ]));
    assert_eq!(code, 2);
    assert_eq!(err["failed_step"], 1);
    assert_eq!(err["reason"], "blocked_place");
}

fn without_timing(report: &str) -> Value {
    let mut v: Value = serde_json::from_str(report).unwrap();
    for o in v["outcomes"].as_array_mut().unwrap() {
        o.as_object_mut().unwrap().remove("wall_ms");
    }
    v.as_object_mut().unwrap().remove("wall_ms");
    v
}

#[test]
fn bench_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let run = |dir: &Path, jobs: &str| {
        lgplan(&[
            "bench",
            "--tasks",
            "6",
            "--budget",
            "1000",
            "--jobs",
            jobs,
            "--seed",
            "5",
            "--out",
            p(dir),
        ])
    };
    let out = run(a.path(), "1");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(
        line.starts_with("mode=lgmcts budget=1000 runs=6 SR_p="),
        "{line}"
    );
    assert!(run(b.path(), "2").status.success());
    let (ra, rb) = (read(a.path(), "report.json"), read(b.path(), "report.json"));
    assert_eq!(without_timing(&ra), without_timing(&rb));
    let report = without_timing(&ra);
    assert!(report["sr_ep"].as_f64() <= report["sr_p"].as_f64());
    check_golden(
        "bench_report.json",
        &(serde_json::to_string_pretty(&report).unwrap() + "\n"),
    );
    assert_eq!(read(a.path(), "report.csv").lines().count(), 7);

    let out = lgplan(&[
        "bench",
        "--tasks",
        "3",
        "--budget",
        "500",
        "--pmcts",
        "--out",
        p(a.path()),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("mode=pmcts"));

    let (code, err) = failure(&lgplan(&["bench", "--tasks", "0", "--out", p(a.path())]));
    assert_eq!((code, err["error"].as_str()), (1, Some("config")));
}

#[test]
fn gen_writes_identical_tasks() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [a.path(), b.path()] {
        let out = lgplan(&["gen", "--tasks", "3", "--seed", "11", "--out", p(dir)]);
        assert!(out.status.success());
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for n in &names {
        assert_eq!(read(a.path(), n), read(b.path(), n));
    }
    check_golden("gen_first_task.json", &read(a.path(), &names[0]));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let scene = core_fixture("kitchen_scene.json");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 4\n[planner]\nbudget = 1\n").unwrap();
    let out_dir = dir.path().join("o");

    // file budget of 1 is too small for this scene
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--goal",
        KITCHEN_GOAL,
        "--config",
        p(&cfg),
        "--out",
        p(&out_dir),
    ]);
    let (code, err) = failure(&out);
    assert_eq!((code, err["error"].as_str()), (1, Some("planning_failed")));

    // the flag wins over the file; seed comes from the file
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--goal",
        KITCHEN_GOAL,
        "--config",
        p(&cfg),
        "--budget",
        "10000",
        "--out",
        p(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let plan: Value = serde_json::from_str(&read(&out_dir, "plan.json")).unwrap();
    assert_eq!(plan["seed"], 4);
    let out = lgplan(&[
        "plan",
        p(&scene),
        "--goal",
        KITCHEN_GOAL,
        "--config",
        p(&cfg),
        "--budget",
        "10000",
        "--seed",
        "9",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success());
    let plan: Value = serde_json::from_str(&read(&out_dir, "plan.json")).unwrap();
    assert_eq!(plan["seed"], 9);

    std::fs::write(&cfg, "[planner]\nbudgett = 5\n").unwrap();
    let (code, err) = failure(&lgplan(&["gen", "--config", p(&cfg), "--out", p(&out_dir)]));
    assert_eq!((code, err["error"].as_str()), (1, Some("config")));
    assert!(err["message"].as_str().unwrap().contains("budgett"));
    std::fs::write(&cfg, "[patterns]\nsigma = -1.0\n").unwrap();
    let (code, _) = failure(&lgplan(&["gen", "--config", p(&cfg), "--out", p(&out_dir)]));
    assert_eq!(code, 1);
}

#[test]
fn usage_errors_are_json() {
    let (code, err) = failure(&lgplan(&["frobnicate"]));
    assert_eq!((code, err["error"].as_str()), (1, Some("usage")));
    let (code, _) = failure(&lgplan(&["plan"]));
    assert_eq!(code, 1);
    let missing = Path::new("/nonexistent/scene.json");
    let (code, err) = failure(&lgplan(&["replay", p(missing), p(missing)]));
    assert_eq!((code, err["error"].as_str()), (1, Some("io")));
    let out = lgplan(&["--help"]);
    assert!(out.status.success());
}
