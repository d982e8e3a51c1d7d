//! Seeded task generation with stored solvability witnesses.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::executor::{check_goal, DEFAULT_TOL_SIGMA};
use crate::geometry::{footprints_overlap, in_workspace, Footprint, Pose, Workspace};
use crate::instruction::{anchor_order, validate, GoalSpec, SubGoal};
use crate::patterns::{sample_prior, Anchor, Family, PatternDb, SamplingContext};
use crate::scene::{ObjectId, Scene, SceneFile, SceneObject};

const NAMES: &[&str] = &[
    "apple", "bottle", "bowl", "box", "cup", "fork", "knife", "lemon", "mug", "phone", "plate",
    "spoon", "block", "can", "pear",
];
const COLORS: &[&str] = &[
    "red", "green", "blue", "yellow", "white", "black", "orange", "purple",
];
const POSE_TRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    SinglePattern,
    MultiPattern,
    InfeasibleStart,
    Crowded,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::SinglePattern => "single_pattern",
            Tag::MultiPattern => "multi_pattern",
            Tag::InfeasibleStart => "infeasible_start",
            Tag::Crowded => "crowded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub tasks: usize,
    pub seed: u64,
    /// `[x_min, x_max, y_min, y_max]` in meters.
    pub workspace: [f64; 4],
    /// Range of object side lengths.
    pub object_size: [f64; 2],
    /// Objects per line, circle, rectangle or tower sub-goal.
    pub goal_objects: [usize; 2],
    /// Objects per spatial sub-goal.
    pub spatial_objects: [usize; 2],
    pub distractors: [usize; 2],
    /// Distractor range used for tasks drawn as crowded.
    pub crowded_distractors: [usize; 2],
    pub p_crowded: f64,
    pub p_multi_pattern: f64,
    pub p_infeasible_start: f64,
    /// Chance that a spatial second sub-goal anchors on a member of the first.
    pub p_shared_anchor: f64,
    pub patterns: Vec<String>,
    /// Free-area ratio below which a start scene is tagged crowded.
    pub crowded_threshold: f64,
    /// Attempts at building a witness before giving up.
    pub witness_tries: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut patterns: Vec<String> = vec!["line".into(), "circle".into(), "rectangle".into()];
        patterns.extend(
            crate::patterns::Relation::ALL
                .iter()
                .map(|r| Family::Spatial(*r).name()),
        );
        BenchConfig {
            tasks: 200,
            seed: 1,
            workspace: [0.0, 1.0, 0.0, 1.0],
            object_size: [0.06, 0.1],
            goal_objects: [3, 5],
            spatial_objects: [1, 2],
            distractors: [2, 6],
            crowded_distractors: [16, 22],
            p_crowded: 0.3,
            p_multi_pattern: 0.5,
            p_infeasible_start: 0.3,
            p_shared_anchor: 0.5,
            patterns,
            crowded_threshold: 0.35,
            witness_tries: 200,
        }
    }
}

impl BenchConfig {
    pub fn workspace(&self) -> Result<Workspace, BenchError> {
        let [a, b, c, d] = self.workspace;
        Workspace::new(a, b, c, d).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        self.workspace()?;
        if self.tasks == 0 {
            return bad("tasks must be at least 1".into());
        }
        let ranges = [
            ("goal_objects", self.goal_objects),
            ("spatial_objects", self.spatial_objects),
            ("distractors", self.distractors),
            ("crowded_distractors", self.crowded_distractors),
        ];
        for (name, [lo, hi]) in ranges {
            if lo > hi {
                return bad(format!("{name}: min exceeds max"));
            }
        }
        if self.goal_objects[0] == 0 || self.spatial_objects[0] == 0 {
            return bad("sub-goals need at least one object".into());
        }
        let [s0, s1] = self.object_size;
        if !(s0 > 0.0 && s1 >= s0) {
            return bad("object_size must be a positive range".into());
        }
        for p in [
            self.p_crowded,
            self.p_multi_pattern,
            self.p_infeasible_start,
            self.p_shared_anchor,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]".into());
            }
        }
        if self.patterns.is_empty() {
            return bad("pattern pool is empty".into());
        }
        for p in &self.patterns {
            if Family::from_name(p).is_none() {
                return bad(format!("unknown pattern `{p}` in pool"));
            }
        }
        if self.p_infeasible_start > 0.0
            && self.distractors[1] == 0
            && self.crowded_distractors[1] == 0
        {
            return bad("infeasible starts need distractors to stack".into());
        }
        if self.witness_tries == 0 {
            return bad("witness_tries must be at least 1".into());
        }
        Ok(())
    }
}

/// A generated benchmark task.
#[derive(Debug, Clone)]
pub struct TaskInstance {
    pub instance_seed: u64,
    pub tags: BTreeSet<Tag>,
    pub scene: Scene,
    pub goal: GoalSpec,
    /// Final poses of every object in an arrangement that meets the goal.
    pub witness: BTreeMap<ObjectId, Pose>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    instance_seed: u64,
    tags: Vec<Tag>,
    goal: GoalSpec,
    scene: SceneFile,
    witness: Vec<WitnessEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessEntry {
    object: ObjectId,
    pose: Pose,
}

impl TaskInstance {
    pub fn to_json(&self) -> String {
        let file = TaskFile {
            instance_seed: self.instance_seed,
            tags: self.tags.iter().copied().collect(),
            goal: self.goal.clone(),
            scene: self.scene.to_file(),
            witness: self
                .witness
                .iter()
                .map(|(&object, &pose)| WitnessEntry { object, pose })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("task serializes")
    }

    pub fn from_json(text: &str) -> Result<TaskInstance, BenchError> {
        let file: TaskFile =
            serde_json::from_str(text).map_err(|e| BenchError::Format(e.to_string()))?;
        let scene_text = serde_json::to_string(&file.scene).expect("scene serializes");
        let scene = Scene::from_json(&scene_text).map_err(|e| BenchError::Format(e.to_string()))?;
        Ok(TaskInstance {
            instance_seed: file.instance_seed,
            tags: file.tags.into_iter().collect(),
            scene,
            goal: file.goal,
            witness: file
                .witness
                .into_iter()
                .map(|w| (w.object, w.pose))
                .collect(),
        })
    }

    /// The start scene with every object moved to its witness pose.
    pub fn witness_scene(&self) -> Scene {
        let poses = self
            .scene
            .ids()
            .map(|id| {
                self.witness
                    .get(&id)
                    .copied()
                    .unwrap_or_else(|| self.scene.pose(id).expect("own id"))
            })
            .collect();
        self.scene.with_poses_unchecked(poses)
    }

    /// Fixed goal poses for the given-goal baseline: goal objects and the
    /// anchors their spatial sub-goals refer to.
    pub fn fixed_goal_poses(&self) -> BTreeMap<ObjectId, Pose> {
        let mut ids: BTreeSet<ObjectId> = self.goal.objects().collect();
        ids.extend(self.goal.subgoals.iter().filter_map(|g| g.anchor));
        ids.into_iter().map(|id| (id, self.witness[&id])).collect()
    }
}

/// Fraction of a grid of reference-footprint placements (axis-aligned
/// squares of the mean object size) that fit at table level.
pub fn free_area_ratio(scene: &Scene, grid: usize) -> f64 {
    if scene.is_empty() {
        return 1.0;
    }
    let mean_side = scene
        .objects()
        .iter()
        .map(|o| {
            let b = o.footprint.place(&Pose::planar(0.0, 0.0, 0.0)).aabb();
            0.5 * (b.width() + b.height())
        })
        .sum::<f64>()
        / scene.len() as f64;
    let probe = Footprint::square(mean_side).expect("positive side");
    let ws = scene.workspace();
    let b = ws.bounds();
    let polys: Vec<_> = (0..scene.len())
        .filter(|&i| scene.pose_at(i).level == 0)
        .map(|i| scene.placed(i))
        .collect();
    let mut free = 0usize;
    for i in 0..grid {
        for j in 0..grid {
            let x = b.min.x + (i as f64 + 0.5) / grid as f64 * b.width();
            let y = b.min.y + (j as f64 + 0.5) / grid as f64 * b.height();
            let p = probe.place(&Pose::planar(x, y, 0.0));
            if in_workspace(&p, ws) && polys.iter().all(|q| !footprints_overlap(&p, q)) {
                free += 1;
            }
        }
    }
    free as f64 / (grid * grid) as f64
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.random_range(lo..=hi)
}

fn random_footprint(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> Footprint {
    let a = rng.random_range(lo..=hi);
    if rng.random_bool(0.25) {
        Footprint::regular(6, 0.5 * a).expect("valid hexagon")
    } else {
        let b = rng.random_range(lo..=hi);
        Footprint::rectangle(a, b).expect("valid rectangle")
    }
}

/// Incremental arrangement of a subset of the objects.
struct Layout<'a> {
    ws: Workspace,
    objects: &'a [SceneObject],
    poses: Vec<Option<Pose>>,
}

impl<'a> Layout<'a> {
    fn new(ws: Workspace, objects: &'a [SceneObject]) -> Self {
        Layout {
            ws,
            objects,
            poses: vec![None; objects.len()],
        }
    }

    fn scene(&self) -> Option<Scene> {
        let objs = self
            .objects
            .iter()
            .zip(&self.poses)
            .filter_map(|(o, p)| p.map(|p| (o.clone(), p)))
            .collect();
        Scene::new(self.ws, objs, 0).ok()
    }

    /// Place object `i` if the result is a valid scene in which the
    /// placement's stack level is the one a pick-and-place would produce.
    fn try_place(&mut self, i: usize, pose: Pose) -> bool {
        let placed = self.objects[i].footprint.place(&pose);
        if !in_workspace(&placed, &self.ws) {
            return false;
        }
        let clash = self.poses.iter().enumerate().any(|(j, p)| {
            p.is_some_and(|p| {
                p.level == pose.level
                    && footprints_overlap(&placed, &self.objects[j].footprint.place(&p))
            })
        });
        if clash && pose.level == 0 {
            return false;
        }
        self.poses[i] = Some(pose);
        let ok = self.scene().is_some_and(|s| {
            let idx = s.index_of(self.objects[i].id).expect("just placed");
            s.implied_level_at(idx, &pose) == pose.level
        });
        if !ok {
            self.poses[i] = None;
        }
        ok
    }

    fn place_uniform(&mut self, i: usize, rng: &mut ChaCha8Rng) -> bool {
        let b = self.ws.bounds();
        for _ in 0..POSE_TRIES {
            let pose = Pose::planar(
                rng.random_range(b.min.x..=b.max.x),
                rng.random_range(b.min.y..=b.max.y),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            if self.try_place(i, pose) {
                return true;
            }
        }
        false
    }
}

struct Draft {
    objects: Vec<SceneObject>,
    goal: GoalSpec,
    /// Anchors that are not goal objects themselves.
    free_anchors: Vec<usize>,
    distractors: Vec<usize>,
    multi: bool,
}

fn draft(config: &BenchConfig, rng: &mut ChaCha8Rng) -> Draft {
    let multi = rng.random_bool(config.p_multi_pattern) && config.patterns.len() > 1;
    let mut pool: Vec<Family> = config
        .patterns
        .iter()
        .map(|p| Family::from_name(p).expect("validated"))
        .collect();
    pool.dedup();
    let mut chosen: Vec<Family> = pool
        .choose_multiple(rng, if multi { 2 } else { 1 })
        .copied()
        .collect();
    // a spatial sub-goal can only anchor on an earlier sub-goal's member
    if chosen.len() == 2 && chosen[0].is_spatial() && !chosen[1].is_spatial() {
        chosen.swap(0, 1);
    }
    let crowded = rng.random_bool(config.p_crowded);
    let mut next_id = 1u32;
    let mut objects = Vec::new();
    let mut new_object = |rng: &mut ChaCha8Rng, objects: &mut Vec<SceneObject>| {
        let fp = random_footprint(rng, config.object_size);
        let name = NAMES.choose(rng).expect("names");
        let color = COLORS.choose(rng).expect("colors");
        objects.push(SceneObject::new(next_id, name, color, fp));
        next_id += 1;
        objects.len() - 1
    };
    let mut subgoals: Vec<SubGoal> = Vec::new();
    let mut free_anchors = Vec::new();
    for (k, fam) in chosen.iter().enumerate() {
        let n = if fam.is_spatial() {
            draw(rng, config.spatial_objects)
        } else {
            draw(rng, config.goal_objects)
        };
        let members: Vec<ObjectId> = (0..n)
            .map(|_| {
                let i = new_object(rng, &mut objects);
                objects[i].id
            })
            .collect();
        let anchor = if fam.is_spatial() {
            if k == 1 && rng.random_bool(config.p_shared_anchor) {
                Some(*subgoals[0].objects.choose(rng).expect("nonempty"))
            } else {
                let a = new_object(rng, &mut objects);
                free_anchors.push(a);
                Some(objects[a].id)
            }
        } else {
            None
        };
        subgoals.push(SubGoal {
            pattern: fam.name(),
            objects: members,
            anchor,
        });
    }
    let n_distractors = draw(
        rng,
        if crowded {
            config.crowded_distractors
        } else {
            config.distractors
        },
    );
    let distractors = (0..n_distractors)
        .map(|_| new_object(rng, &mut objects))
        .collect();
    Draft {
        objects,
        goal: GoalSpec::new(subgoals),
        free_anchors,
        distractors,
        multi,
    }
}

/// Build the witness: free anchors placed uniformly, then each sub-goal
/// sampled from its prior into empty space, then distractors. Returns the
/// anchor poses (shared with the start scene) and the full layout.
fn build_witness(
    d: &Draft,
    db: &PatternDb,
    ws: Workspace,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Pose>> {
    let mut lay = Layout::new(ws, &d.objects);
    for &a in &d.free_anchors {
        if !lay.place_uniform(a, rng) {
            return None;
        }
    }
    let index: BTreeMap<ObjectId, usize> = d
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| (o.id, i))
        .collect();
    for g in anchor_order(&d.goal).expect("generated goals are acyclic") {
        let sg = &d.goal.subgoals[g];
        let prior = db.get(&sg.pattern).expect("pool validated");
        let mut ctx = SamplingContext::new(prior, ws, sg.objects.len());
        if let Some(a) = sg.anchor {
            let ai = index[&a];
            ctx = ctx.with_anchor(Anchor::new(lay.poses[ai]?, &d.objects[ai].footprint));
        }
        for &id in &sg.objects {
            let i = index[&id];
            let mut placed = false;
            for _ in 0..POSE_TRIES {
                let pose = sample_prior(&ctx, rng).ok()?;
                if lay.try_place(i, pose) {
                    placed = true;
                    ctx.sampled.push(pose);
                    break;
                }
            }
            if !placed {
                return None;
            }
        }
    }
    for &i in &d.distractors {
        if !lay.place_uniform(i, rng) {
            return None;
        }
    }
    lay.poses.into_iter().collect()
}

/// Start scene: free anchors where the witness has them, everything else
/// uniform at table level; optionally a distractor stacked on a goal object.
fn build_start(
    d: &Draft,
    witness: &[Pose],
    ws: Workspace,
    stack: bool,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Pose>, bool)> {
    let mut lay = Layout::new(ws, &d.objects);
    for &a in &d.free_anchors {
        if !lay.try_place(a, witness[a]) {
            return None;
        }
    }
    let goal_idx: Vec<usize> = d
        .goal
        .objects()
        .map(|id| {
            d.objects
                .iter()
                .position(|o| o.id == id)
                .expect("goal object")
        })
        .collect();
    let mut order: Vec<usize> = goal_idx
        .iter()
        .copied()
        .chain(d.distractors.iter().copied())
        .collect();
    order.shuffle(rng);
    let mut stacked = false;
    let mut pending: Vec<usize> = Vec::new();
    if stack {
        let mut bases = goal_idx.clone();
        bases.shuffle(rng);
        let mut tops = d.distractors.clone();
        tops.shuffle(rng);
        'outer: for &base in &bases {
            if !lay.place_uniform(base, rng) {
                return None;
            }
            for &top in &tops {
                let bp = lay.poses[base].expect("just placed");
                if lay.try_place(top, Pose::new(bp.x, bp.y, bp.theta(), 1)) {
                    stacked = true;
                    order.retain(|&o| o != base && o != top);
                    break 'outer;
                }
            }
            pending.push(base);
        }
        for p in pending {
            order.retain(|&o| o != p);
        }
    }
    for i in order {
        if !lay.place_uniform(i, rng) {
            return None;
        }
    }
    let poses: Option<Vec<Pose>> = lay.poses.into_iter().collect();
    poses.map(|p| (p, stacked))
}

/// Generate one task. The witness is checked against the goal before the
/// task is returned.
pub fn gen_task(config: &BenchConfig, seed: u64) -> Result<TaskInstance, BenchError> {
    config.validate()?;
    let ws = config.workspace()?;
    let db = PatternDb::builtin(&ws);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.witness_tries {
        let d = draft(config, &mut rng);
        let Some(witness) = build_witness(&d, &db, ws, &mut rng) else {
            continue;
        };
        let want_stack = rng.random_bool(config.p_infeasible_start);
        if want_stack && d.distractors.is_empty() {
            return Err(BenchError::Config(
                "infeasible start drawn but the task has no distractors".into(),
            ));
        }
        let Some((start, stacked)) = build_start(&d, &witness, ws, want_stack, &mut rng) else {
            continue;
        };
        if want_stack && !stacked {
            continue;
        }
        let objs: Vec<(SceneObject, Pose)> = d
            .objects
            .iter()
            .cloned()
            .zip(start.iter().copied())
            .collect();
        let scene =
            Scene::new(ws, objs, seed).map_err(|e| BenchError::Ungeneratable(e.to_string()))?;
        let witness: BTreeMap<ObjectId, Pose> =
            d.objects.iter().map(|o| o.id).zip(witness).collect();
        let mut tags = BTreeSet::new();
        tags.insert(if d.multi {
            Tag::MultiPattern
        } else {
            Tag::SinglePattern
        });
        if d.goal
            .objects()
            .any(|id| !scene.is_reachable(id).expect("own id"))
        {
            tags.insert(Tag::InfeasibleStart);
        }
        if free_area_ratio(&scene, 40) < config.crowded_threshold {
            tags.insert(Tag::Crowded);
        }
        let task = TaskInstance {
            instance_seed: seed,
            tags,
            scene,
            goal: d.goal,
            witness,
        };
        validate(&task.goal, &task.scene, &db)
            .map_err(|e| BenchError::Ungeneratable(e.to_string()))?;
        let ws_scene = task.witness_scene();
        if ws_scene.check_invariants().is_err()
            || !check_goal(&ws_scene, &task.goal, &db, DEFAULT_TOL_SIGMA).ok
        {
            continue;
        }
        return Ok(task);
    }
    Err(BenchError::Ungeneratable(format!(
        "no witness within {} attempts (seed {seed})",
        config.witness_tries
    )))
}

/// Task seeds for a suite: consecutive integers from a base derived from
/// the suite seed.
pub fn suite_seeds(config: &BenchConfig) -> Vec<u64> {
    let base = config.seed.wrapping_mul(1_000_003);
    (0..config.tasks as u64)
        .map(|k| base.wrapping_add(k))
        .collect()
}

pub fn gen_suite(config: &BenchConfig) -> Result<Vec<TaskInstance>, BenchError> {
    config.validate()?;
    suite_seeds(config)
        .into_iter()
        .map(|s| gen_task(config, s))
        .collect()
}
