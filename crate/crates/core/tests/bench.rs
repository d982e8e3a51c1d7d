mod common;

use lgplan_core::bench::{
    evaluate, gen_suite, gen_task, oracle_solve, BenchConfig, BenchError, EvalConfig, OracleConfig,
    Tag, TaskInstance,
};
use lgplan_core::executor::{check_goal, DEFAULT_TOL_SIGMA};
use lgplan_core::patterns::PatternDb;

fn small_suite(tasks: usize) -> (BenchConfig, Vec<TaskInstance>) {
    let cfg = BenchConfig {
        tasks,
        seed: 9,
        ..BenchConfig::default()
    };
    let suite = gen_suite(&cfg).unwrap();
    (cfg, suite)
}

#[test]
fn single_line_task() {
    let cfg = BenchConfig {
        patterns: vec!["line".into()],
        goal_objects: [4, 4],
        distractors: [0, 0],
        p_crowded: 0.0,
        p_multi_pattern: 0.0,
        p_infeasible_start: 0.0,
        ..BenchConfig::default()
    };
    let task = gen_task(&cfg, 7).unwrap();
    assert_eq!(task.scene.len(), 4);
    assert_eq!(task.goal.subgoals.len(), 1);
    assert_eq!(task.goal.subgoals[0].pattern, "line");
    assert!(task
        .scene
        .ids()
        .all(|id| task.scene.is_reachable(id).unwrap()));
    let db = PatternDb::builtin(task.scene.workspace());
    let witness = task.witness_scene();
    assert!(witness.check_invariants().is_ok());
    assert!(check_goal(&witness, &task.goal, &db, DEFAULT_TOL_SIGMA).ok);
    assert!(task.tags.contains(&Tag::SinglePattern));
}

#[test]
fn forced_infeasible_start() {
    let cfg = BenchConfig {
        p_infeasible_start: 1.0,
        ..BenchConfig::default()
    };
    for seed in 0..20 {
        let task = gen_task(&cfg, seed).unwrap();
        assert!(task.tags.contains(&Tag::InfeasibleStart));
        assert!(task
            .goal
            .objects()
            .any(|id| !task.scene.is_reachable(id).unwrap()));
    }
    let none = BenchConfig {
        p_infeasible_start: 1.0,
        distractors: [0, 0],
        crowded_distractors: [0, 0],
        ..BenchConfig::default()
    };
    assert!(matches!(gen_task(&none, 0), Err(BenchError::Config(_))));
}

#[test]
fn multi_pattern_subsets_are_disjoint() {
    let cfg = BenchConfig {
        p_multi_pattern: 1.0,
        ..BenchConfig::default()
    };
    for seed in 0..30 {
        let task = gen_task(&cfg, seed).unwrap();
        assert!(task.tags.contains(&Tag::MultiPattern));
        let g = &task.goal.subgoals;
        assert_eq!(g.len(), 2);
        assert_ne!(g[0].pattern, g[1].pattern);
        assert!(g[0].objects.iter().all(|o| !g[1].objects.contains(o)));
    }
}

#[test]
fn generated_witnesses_are_sound() {
    let (_, suite) = small_suite(100);
    for task in &suite {
        let db = PatternDb::builtin(task.scene.workspace());
        let w = task.witness_scene();
        assert!(w.check_invariants().is_ok(), "{}", task.instance_seed);
        assert!(check_goal(&w, &task.goal, &db, DEFAULT_TOL_SIGMA).ok);
        assert!(task.tags.contains(&Tag::SinglePattern) ^ task.tags.contains(&Tag::MultiPattern));
        if task.tags.contains(&Tag::InfeasibleStart) {
            assert!(task
                .goal
                .objects()
                .any(|id| !task.scene.is_reachable(id).unwrap()));
        }
        let again = TaskInstance::from_json(&task.to_json()).unwrap();
        assert_eq!(again.to_json(), task.to_json());
    }
}

#[test]
fn config_errors() {
    let bad = [
        BenchConfig {
            tasks: 0,
            ..BenchConfig::default()
        },
        BenchConfig {
            patterns: vec!["zigzag".into()],
            ..BenchConfig::default()
        },
        BenchConfig {
            p_crowded: 1.5,
            ..BenchConfig::default()
        },
        BenchConfig {
            workspace: [1.0, 0.0, 0.0, 1.0],
            ..BenchConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(gen_suite(&cfg), Err(BenchError::Config(_))));
    }
    let huge = BenchConfig {
        object_size: [0.9, 0.95],
        witness_tries: 5,
        ..BenchConfig::default()
    };
    assert!(matches!(
        gen_task(&huge, 0),
        Err(BenchError::Ungeneratable(_))
    ));
}

#[test]
fn already_solved_suite_scores_one() {
    let (_, mut suite) = small_suite(10);
    for t in &mut suite {
        t.scene = t.witness_scene();
    }
    let report = evaluate(&suite, &EvalConfig::default()).unwrap();
    assert_eq!((report.sr_p, report.sr_ep), (1.0, 1.0));
    assert!(report.outcomes.iter().all(|o| o.plan_length == 0));
}

#[test]
fn unsatisfiable_task_scores_zero() {
    let (_, mut suite) = small_suite(3);
    let case = common::unsatisfiable_case(1);
    suite.push(TaskInstance {
        instance_seed: 424242,
        tags: [Tag::SinglePattern].into_iter().collect(),
        scene: case.scene,
        goal: case.goal,
        witness: Default::default(),
    });
    let mut cfg = EvalConfig::default();
    cfg.planner.budget = 2000;
    let report = evaluate(&suite, &cfg).unwrap();
    let last = report
        .outcomes
        .iter()
        .find(|o| o.instance_seed == 424242)
        .unwrap();
    assert!(!last.planned && !last.success());
    assert!(report.sr_ep <= report.sr_p && report.sr_p <= 0.75);
}

#[test]
fn reports_are_reproducible() {
    let (cfg, suite) = small_suite(20);
    let again = gen_suite(&cfg).unwrap();
    let a: Vec<String> = suite.iter().map(TaskInstance::to_json).collect();
    let b: Vec<String> = again.iter().map(TaskInstance::to_json).collect();
    assert_eq!(a, b);
    let ec = EvalConfig {
        seed_offsets: vec![0, 1],
        ..EvalConfig::default()
    };
    let r1 = evaluate(&suite, &ec).unwrap();
    let parallel = EvalConfig {
        jobs: 2,
        ..ec.clone()
    };
    let r2 = evaluate(&again, &parallel).unwrap();
    assert_eq!(r1.to_json_without_timing(), r2.to_json_without_timing());
    assert!(r1.sr_ep <= r1.sr_p);
    let csv = r1.to_csv();
    assert_eq!(csv.lines().count(), 41);
    assert!(csv.starts_with("seed,planner_seed,tags,planned,executed,goal_met,steps,wall_ms"));
    assert!(evaluate(&[], &ec).is_err());
}

#[test]
fn oracle_overflow_and_limits() {
    let case = common::tiny_case(3);
    let db = PatternDb::builtin(case.scene.workspace());
    let tight = OracleConfig {
        max_states: 5,
        ..OracleConfig::default()
    };
    // either solved at the root or out of room almost at once
    match oracle_solve(&case.scene, &case.goal, &db, &tight) {
        Ok(o) => assert_eq!(o.actions, Some(0)),
        Err(e) => assert!(e.to_string().contains("overflow")),
    }
    let coarse = OracleConfig {
        nx: 13,
        ..OracleConfig::default()
    };
    assert!(oracle_solve(&case.scene, &case.goal, &db, &coarse).is_err());
}
