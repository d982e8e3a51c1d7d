#![allow(dead_code)]

use std::path::PathBuf;

use lgplan_core::geometry::{footprints_overlap, in_workspace, Footprint, Pose, Workspace};
use lgplan_core::instruction::{parse_dsl, parse_dsl_for_scene, GoalSpec, SubGoal};
use lgplan_core::patterns::{Family, PatternDb, Relation};
use lgplan_core::scene::{Scene, SceneObject};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const KITCHEN_GOAL: &str = "behind(o_apple|o_spoon); right(o_cup|o_apple)";
pub const KITCHEN_SEED: u64 = 0;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn load_scene(name: &str) -> Scene {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    Scene::from_json(&text).expect("fixture parses")
}

pub fn kitchen() -> (Scene, GoalSpec, PatternDb) {
    let scene = load_scene("kitchen_scene.json");
    let db = PatternDb::builtin(scene.workspace());
    let goal = parse_dsl_for_scene(KITCHEN_GOAL, &db, &scene).expect("goal parses");
    (scene, goal, db)
}

/// Three blocks to line up, the first one buried under a box.
pub fn stacked() -> (Scene, GoalSpec, PatternDb) {
    let scene = load_scene("stacked_scene.json");
    let db = PatternDb::builtin(scene.workspace());
    let goal = parse_dsl("line(o1,o2,o3)", &db).expect("goal parses");
    (scene, goal, db)
}

/// Random structurally valid goal over ids 1..=60.
pub fn random_goal(rng: &mut ChaCha8Rng, db: &PatternDb) -> GoalSpec {
    let names: Vec<&str> = db.priors().iter().map(|p| p.name.as_str()).collect();
    let mut free: Vec<u32> = (1..=60).collect();
    let mut used: Vec<u32> = Vec::new();
    let mut subgoals = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let name = *names.choose(rng).unwrap();
        let n = rng.random_range(1..=4);
        let mut objects = Vec::new();
        for _ in 0..n {
            let i = rng.random_range(0..free.len());
            objects.push(free.swap_remove(i));
        }
        let spatial = Family::from_name(name).is_some_and(|f| f.is_spatial());
        let anchor = if spatial {
            // earlier members or untouched ids only, so no cycles
            if !used.is_empty() && rng.random_bool(0.5) {
                Some(*used.choose(rng).unwrap())
            } else {
                let i = rng.random_range(0..free.len());
                Some(free.swap_remove(i))
            }
        } else {
            None
        };
        used.extend(&objects);
        subgoals.push(match anchor {
            Some(a) => SubGoal::anchored(name, &objects, a),
            None => SubGoal::new(name, &objects),
        });
    }
    GoalSpec::new(subgoals)
}

pub struct TinyCase {
    pub scene: Scene,
    pub goal: GoalSpec,
    /// True when no continuous arrangement can satisfy the goal.
    pub unsatisfiable: bool,
}

fn scatter(ws: Workspace, objects: Vec<SceneObject>, rng: &mut ChaCha8Rng) -> Option<Scene> {
    let b = ws.bounds();
    let mut placed: Vec<(SceneObject, Pose)> = Vec::new();
    for o in objects {
        let mut ok = false;
        for _ in 0..200 {
            let theta = if rng.random_bool(0.5) {
                0.0
            } else {
                std::f64::consts::FRAC_PI_2
            };
            let pose = Pose::planar(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
                theta,
            );
            let poly = o.footprint.place(&pose);
            if in_workspace(&poly, &ws)
                && placed
                    .iter()
                    .all(|(q, p)| !footprints_overlap(&poly, &q.footprint.place(p)))
            {
                placed.push((o.clone(), pose));
                ok = true;
                break;
            }
        }
        if !ok {
            return None;
        }
    }
    Scene::new(ws, placed, 0).ok()
}

/// A small instance the brute-force oracle can decide: 0.6 m square table,
/// two or three 8 x 5 cm objects, one spatial or line goal.
pub fn tiny_case(seed: u64) -> TinyCase {
    let ws = Workspace::new(0.0, 0.6, 0.0, 0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fp = Footprint::rectangle(0.08, 0.05).unwrap();
    loop {
        let kind = rng.random_range(0..4);
        let n = if kind == 0 { 2 } else { 3 };
        let objects: Vec<SceneObject> = (1..=n)
            .map(|i| SceneObject::new(i, "block", "red", fp.clone()))
            .collect();
        let Some(scene) = scatter(ws, objects, &mut rng) else {
            continue;
        };
        let rel =
            |rng: &mut ChaCha8Rng| Family::Spatial(*Relation::ALL.choose(rng).unwrap()).name();
        let goal = match kind {
            0 | 1 => GoalSpec::new(vec![SubGoal::anchored(&rel(&mut rng), &[1], 2)]),
            2 => GoalSpec::new(vec![
                SubGoal::anchored(&rel(&mut rng), &[1], 2),
                SubGoal::anchored(&rel(&mut rng), &[3], 2),
            ]),
            _ => GoalSpec::new(vec![SubGoal::new("line", &[1, 2, 3])]),
        };
        return TinyCase {
            scene,
            goal,
            unsatisfiable: false,
        };
    }
}

/// Two 45 cm squares on a 60 cm table cannot stand side by side in any
/// direction, so every relation between them is unsatisfiable.
pub fn unsatisfiable_case(seed: u64) -> TinyCase {
    let ws = Workspace::new(0.0, 0.6, 0.0, 0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big = Footprint::square(0.45).unwrap();
    let rel = *Relation::ALL.choose(&mut rng).unwrap();
    let mut objs = vec![
        (
            SceneObject::new(1, "crate", "brown", big.clone()),
            Pose::planar(0.3, 0.3, 0.0),
        ),
        (
            SceneObject::new(2, "crate", "grey", big),
            Pose::new(0.3, 0.3, 0.0, 1),
        ),
    ];
    if rng.random_bool(0.5) {
        let small = Footprint::rectangle(0.08, 0.05).unwrap();
        objs.push((
            SceneObject::new(3, "block", "red", small),
            Pose::planar(0.55, 0.03, 0.0),
        ));
    }
    // the two crates start stacked so the rest of the table stays usable
    let scene = Scene::new(ws, objs, 0).unwrap();
    TinyCase {
        scene,
        goal: GoalSpec::new(vec![SubGoal::anchored(
            &Family::Spatial(rel).name(),
            &[1],
            2,
        )]),
        unsatisfiable: true,
    }
}
