mod common;

use std::collections::BTreeMap;

use lgplan_core::executor::{check_goal, replay, DEFAULT_TOL_SIGMA};
use lgplan_core::geometry::{Footprint, Pose, Workspace};
use lgplan_core::planner::{mcts_plan, pmcts_plan, ActionKind, PlanError, PlannerConfig};
use lgplan_core::scene::{ObjectId, Scene, SceneObject};

#[test]
fn kitchen_trace() {
    let (scene, goal, db) = common::kitchen();
    let plan = mcts_plan(
        &scene,
        &goal,
        &db,
        &PlannerConfig::default(),
        common::KITCHEN_SEED,
    )
    .unwrap();
    assert_eq!(
        plan.kinds(),
        vec![
            ActionKind::GoalPlacement,
            ActionKind::Relocation,
            ActionKind::GoalPlacement
        ]
    );
    let objects: Vec<u32> = plan.actions.iter().map(|a| a.object.0).collect();
    // apple, then the knife out of the way, then the cup
    assert_eq!(objects, vec![2, 4, 3]);
    let report = replay(&scene, &plan);
    assert!(report.ok);
    assert!(check_goal(&report.final_scene, &goal, &db, DEFAULT_TOL_SIGMA).ok);
}

#[test]
fn stacked_start_unstacks_first() {
    let (scene, goal, db) = common::stacked();
    for seed in 0..10 {
        let plan = mcts_plan(&scene, &goal, &db, &PlannerConfig::default(), seed).unwrap();
        let unstack = plan
            .actions
            .iter()
            .position(|a| a.kind == ActionKind::Unstack && a.object == ObjectId(4))
            .expect("box is moved off");
        let place = plan
            .actions
            .iter()
            .position(|a| a.kind == ActionKind::GoalPlacement && a.object == ObjectId(1))
            .expect("buried block is placed");
        assert!(unstack < place, "seed {seed}: {:?}", plan.kinds());
        let report = replay(&scene, &plan);
        assert!(report.ok);
        assert!(check_goal(&report.final_scene, &goal, &db, DEFAULT_TOL_SIGMA).ok);
    }
}

#[test]
fn same_seed_same_plan() {
    let (scene, goal, db) = common::kitchen();
    let cfg = PlannerConfig::default();
    for seed in 0..5 {
        let a = mcts_plan(&scene, &goal, &db, &cfg, seed).unwrap();
        let b = mcts_plan(&scene, &goal, &db, &cfg, seed).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}

/// Two blocks trade places in a three-cell corridor: one of them has to
/// step aside into the spare cell first.
#[test]
fn pmcts_swap_needs_a_buffer_move() {
    let ws = Workspace::new(0.0, 0.3, 0.0, 0.1).unwrap();
    let sq = Footprint::square(0.09).unwrap();
    let scene = Scene::new(
        ws,
        vec![
            (
                SceneObject::new(1, "a", "red", sq.clone()),
                Pose::planar(0.05, 0.05, 0.0),
            ),
            (
                SceneObject::new(2, "b", "blue", sq),
                Pose::planar(0.15, 0.05, 0.0),
            ),
        ],
        0,
    )
    .unwrap();
    let targets: BTreeMap<ObjectId, Pose> = [
        (ObjectId(1), Pose::planar(0.15, 0.05, 0.0)),
        (ObjectId(2), Pose::planar(0.05, 0.05, 0.0)),
    ]
    .into_iter()
    .collect();
    let plan = pmcts_plan(&scene, &targets, &PlannerConfig::default(), 2).unwrap();
    assert!(plan.actions.len() >= 3, "{:?}", plan.kinds());
    assert!(plan.kinds().contains(&ActionKind::Relocation));
    let report = replay(&scene, &plan);
    assert!(report.ok);
    for (id, p) in &targets {
        assert!(report.final_scene.pose(*id).unwrap().approx_eq(p, 1e-9));
    }
}

#[test]
fn tiny_budget_reports_partial_progress() {
    let cfg = lgplan_core::bench::BenchConfig {
        p_crowded: 1.0,
        ..Default::default()
    };
    let mut failures = 0;
    for seed in 0..20 {
        let task = lgplan_core::bench::gen_task(&cfg, seed).unwrap();
        let db = lgplan_core::patterns::PatternDb::builtin(task.scene.workspace());
        let pc = PlannerConfig::default().with_budget(3);
        if let Err(PlanError::Failed(f)) = mcts_plan(&task.scene, &task.goal, &db, &pc, seed) {
            assert!(f.steps_used <= 3);
            assert!(f.best_reward < f.total);
            failures += 1;
        }
    }
    assert!(failures > 10);
}

#[test]
fn config_rejects_bad_values() {
    let (scene, goal, db) = common::kitchen();
    for cfg in [
        PlannerConfig::default().with_budget(0),
        PlannerConfig {
            width: 0,
            ..PlannerConfig::default()
        },
        PlannerConfig {
            c: -1.0,
            ..PlannerConfig::default()
        },
    ] {
        assert!(matches!(
            mcts_plan(&scene, &goal, &db, &cfg, 0),
            Err(PlanError::Config(_))
        ));
    }
}

#[test]
fn success_grows_with_budget_on_oracle_solvable_cases() {
    use lgplan_core::bench::{oracle_solve, OracleConfig};
    use lgplan_core::patterns::PatternDb;
    let cases: Vec<_> = (1000u64..)
        .map(common::tiny_case)
        .filter(|c| {
            let db = PatternDb::builtin(c.scene.workspace());
            oracle_solve(&c.scene, &c.goal, &db, &OracleConfig::default()).is_ok_and(|o| o.solvable)
        })
        .take(50)
        .collect();
    let mut rates = Vec::new();
    for budget in [500, 2000, 10_000] {
        let cfg = PlannerConfig::default().with_budget(budget);
        let mut ok = 0;
        for c in &cases {
            let db = PatternDb::builtin(c.scene.workspace());
            for seed in 0..20 {
                ok += mcts_plan(&c.scene, &c.goal, &db, &cfg, seed).is_ok() as usize;
            }
        }
        rates.push(ok as f64 / (20 * cases.len()) as f64);
    }
    assert!(rates[0] <= rates[1] && rates[1] <= rates[2], "{rates:?}");
    assert!(rates[2] >= 0.95, "{rates:?}");
}
