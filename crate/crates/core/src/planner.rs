//! Monte Carlo tree search over pick-and-place actions.
//!
//! A node holds a scene snapshot and, for each sub-goal, which of its
//! objects currently sit at a sampled goal pose. Expanding a node runs one
//! simulation step: sample a goal pose for the next object of a sub-goal and
//! place it, or, when the object is buried or every sample collides, move an
//! obstacle out of the way. The reward of a node is the number of goal
//! objects placed. Search stops at the first node with nothing left to
//! place.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{check_subgoal, DEFAULT_TOL_SIGMA};
use crate::geometry::{footprints_overlap, in_workspace, Polygon, Pose};
use crate::instruction::{validate, GoalError, GoalSpec};
use crate::patterns::{sample_prior, Anchor, Family, PatternDb, PatternPrior, SamplingContext};
use crate::scene::{ObjectId, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Maximum number of simulation steps.
    pub budget: usize,
    /// UCB exploration constant.
    pub c: f64,
    /// Expansion slots per node and sub-goal.
    pub width: usize,
    /// Prior samples tried per simulation before relocating an obstacle.
    pub pose_tries: usize,
    /// Uniform samples tried when relocating an object.
    pub relocation_tries: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            budget: 10_000,
            c: std::f64::consts::SQRT_2,
            width: 8,
            pose_tries: 64,
            relocation_tries: 64,
        }
    }
}

impl PlannerConfig {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Config(m.to_string()));
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad("c must be finite and non-negative");
        }
        if self.width == 0 || self.pose_tries == 0 || self.relocation_tries == 0 {
            return bad("width, pose_tries and relocation_tries must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    GoalPlacement,
    Relocation,
    Unstack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub object: ObjectId,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub level: u32,
    pub kind: ActionKind,
}

impl Action {
    pub fn new(object: ObjectId, pose: Pose, kind: ActionKind) -> Action {
        Action {
            object,
            x: pose.x,
            y: pose.y,
            theta: pose.theta(),
            level: pose.level,
            kind,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.theta, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub seed: u64,
    pub steps_used: usize,
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Plan, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn kinds(&self) -> Vec<ActionKind> {
        self.actions.iter().map(|a| a.kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanFailure {
    pub reason: String,
    pub steps_used: usize,
    /// Most goal objects placed at once in any explored node.
    pub best_reward: usize,
    pub total: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid goal: {0}")]
    Goal(#[from] GoalError),
    #[error("invalid planner config: {0}")]
    Config(String),
    #[error("invalid fixed goal: {0}")]
    FixedGoal(String),
    #[error("planning failed ({}) after {} steps, best partial {}/{}",
        .0.reason, .0.steps_used, .0.best_reward, .0.total)]
    Failed(PlanFailure),
    #[error("leaf")]
    Leaf,
}

/// Why a simulation step produced no action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimFailure {
    /// The sub-goal's prior could not produce a pose (e.g. empty region).
    Prior,
    /// Every sample was rejected and none collided with a movable object.
    NoFreePose,
    /// No collision-free spot was found for the object being moved away.
    NoRelocation,
}

pub fn ucb_score(w: f64, n: u32, parent_n: u32, c: f64) -> f64 {
    let n = f64::from(n);
    w / n + c * (f64::from(parent_n).ln() / n).sqrt()
}

/// Index of the child with the highest UCB score; ties go to the lowest
/// index. `children` holds `(cumulative reward, visits)` pairs.
pub fn ucb_select(children: &[(f64, u32)], parent_n: u32, c: f64) -> Result<usize, PlanError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(w, n)) in children.iter().enumerate() {
        let s = ucb_score(w, n, parent_n, c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(PlanError::Leaf)
}

#[derive(Debug, Clone)]
enum Target {
    Prior(PatternPrior),
    Fixed(Pose),
}

#[derive(Debug, Clone)]
struct Group {
    /// Scene indices, in sampling order.
    objects: Vec<usize>,
    anchor: Option<usize>,
    target: Target,
    /// Already satisfied by the start scene.
    met: bool,
}

impl Group {
    fn family(&self) -> Option<Family> {
        match &self.target {
            Target::Prior(p) => Some(p.family),
            Target::Fixed(_) => None,
        }
    }

    /// Curve and tower samples depend on every earlier one.
    fn is_chained(&self) -> bool {
        matches!(self.family(), Some(f) if !f.is_spatial())
    }
}

/// Scene snapshot plus the goal poses currently held by each sub-goal.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub scene: Scene,
    placed: Vec<Vec<Option<Pose>>>,
}

impl SearchState {
    pub fn placed_count(&self) -> usize {
        self.placed.iter().flatten().filter(|p| p.is_some()).count()
    }

    pub fn remaining(&self) -> usize {
        self.placed.iter().flatten().filter(|p| p.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.remaining() == 0
    }

    /// Goal poses held by sub-goal `g`, `None` where not yet sampled.
    pub fn subgoal_poses(&self, g: usize) -> &[Option<Pose>] {
        &self.placed[g]
    }

    fn next_slot(&self, g: usize) -> Option<usize> {
        self.placed[g].iter().position(Option::is_none)
    }
}

/// The search problem: a start scene and the requirements to satisfy.
#[derive(Debug, Clone)]
pub struct Problem {
    scene: Scene,
    groups: Vec<Group>,
    config: PlannerConfig,
}

#[derive(Debug)]
struct Node {
    state: SearchState,
    parent: Option<usize>,
    action: Option<Action>,
    visits: u32,
    reward: f64,
    children: Vec<usize>,
    slots_used: Vec<usize>,
    cursor: usize,
    dead: bool,
}

impl Problem {
    /// Requirements from a goal specification and its pattern priors.
    pub fn from_goal(
        scene: &Scene,
        goal: &GoalSpec,
        db: &PatternDb,
        config: &PlannerConfig,
    ) -> Result<Problem, PlanError> {
        config.validate()?;
        validate(goal, scene, db)?;
        let idx = |id: ObjectId| scene.index_of(id).expect("validated");
        let groups = goal
            .subgoals
            .iter()
            .map(|g| Group {
                objects: g.objects.iter().map(|&id| idx(id)).collect(),
                anchor: g.anchor.map(idx),
                target: Target::Prior(db.get(&g.pattern).expect("validated").clone()),
                met: check_subgoal(scene, g, db, DEFAULT_TOL_SIGMA),
            })
            .collect();
        Ok(Problem {
            scene: scene.clone(),
            groups,
            config: config.clone(),
        })
    }

    /// One requirement per object: be at exactly the given pose.
    pub fn from_fixed(
        scene: &Scene,
        fixed: &BTreeMap<ObjectId, Pose>,
        config: &PlannerConfig,
    ) -> Result<Problem, PlanError> {
        config.validate()?;
        let mut groups = Vec::with_capacity(fixed.len());
        for (&id, &pose) in fixed {
            let i = scene
                .index_of(id)
                .ok_or_else(|| PlanError::FixedGoal(format!("unknown object {id}")))?;
            groups.push(Group {
                objects: vec![i],
                anchor: None,
                target: Target::Fixed(pose),
                met: scene.pose_at(i).approx_eq(&pose, 1e-9),
            });
        }
        let placed: Vec<(ObjectId, Polygon, u32)> = groups
            .iter()
            .map(|g| {
                let Target::Fixed(p) = g.target else {
                    unreachable!()
                };
                let i = g.objects[0];
                (scene.id_at(i), scene.footprint_at(i).place(&p), p.level)
            })
            .collect();
        for (k, (id, poly, level)) in placed.iter().enumerate() {
            if !in_workspace(poly, scene.workspace()) {
                return Err(PlanError::FixedGoal(format!(
                    "{id} is outside the workspace"
                )));
            }
            for (other, poly2, level2) in &placed[k + 1..] {
                if level == level2 && footprints_overlap(poly, poly2) {
                    return Err(PlanError::FixedGoal(format!("{id} and {other} overlap")));
                }
            }
        }
        Ok(Problem {
            scene: scene.clone(),
            groups,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn subgoal_count(&self) -> usize {
        self.groups.len()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.objects.len()).sum()
    }

    pub fn root_state(&self) -> SearchState {
        let placed = self
            .groups
            .iter()
            .map(|g| {
                if g.met {
                    g.objects
                        .iter()
                        .map(|&i| Some(self.scene.pose_at(i)))
                        .collect()
                } else {
                    vec![None; g.objects.len()]
                }
            })
            .collect();
        SearchState {
            scene: self.scene.clone(),
            placed,
        }
    }

    /// A spatial sub-goal waits until its anchor, if the anchor is itself a
    /// goal object, holds a sampled goal pose.
    pub fn dependency_gate(&self, state: &SearchState, g: usize) -> bool {
        let Some(a) = self.groups[g].anchor else {
            return true;
        };
        for (h, grp) in self.groups.iter().enumerate() {
            if let Some(j) = grp.objects.iter().position(|&o| o == a) {
                return state.placed[h][j].is_some();
            }
        }
        true
    }

    fn open(&self, state: &SearchState) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&g| state.next_slot(g).is_some() && self.dependency_gate(state, g))
            .collect()
    }

    fn context(&self, state: &SearchState, g: usize) -> Option<SamplingContext<'_>> {
        let grp = &self.groups[g];
        let Target::Prior(prior) = &grp.target else {
            return None;
        };
        let sampled: Vec<Pose> = if grp.is_chained() {
            state.placed[g].iter().map_while(|p| *p).collect()
        } else {
            state.placed[g].iter().flatten().copied().collect()
        };
        let mut ctx = SamplingContext::new(prior, *state.scene.workspace(), grp.objects.len())
            .with_sampled(sampled);
        if let Some(a) = grp.anchor {
            ctx = ctx.with_anchor(Anchor::new(
                state.scene.pose_at(a),
                state.scene.footprint_at(a),
            ));
        }
        Some(ctx)
    }

    fn uniform_free_pose<R: Rng + ?Sized>(
        &self,
        scene: &Scene,
        idx: usize,
        rng: &mut R,
    ) -> Option<Pose> {
        let b = scene.workspace().bounds();
        for _ in 0..self.config.relocation_tries {
            let pose = Pose::planar(
                rng.random_range(b.min.x..=b.max.x),
                rng.random_range(b.min.y..=b.max.y),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            if scene.check_placement_at(idx, &pose).is_ok() {
                return Some(pose);
            }
        }
        None
    }

    /// Move `idx` (or, if something sits on it, the top of its stack) to a
    /// uniform free spot.
    fn clear_away<R: Rng + ?Sized>(
        &self,
        scene: &Scene,
        idx: usize,
        kind: ActionKind,
        rng: &mut R,
    ) -> Result<Action, SimFailure> {
        let (mover, kind) = if scene.reachable_at(idx) {
            (idx, kind)
        } else {
            let top = scene
                .blockers_above(scene.id_at(idx))
                .expect("index in scene")[0];
            (
                scene.index_of(top).expect("blocker in scene"),
                ActionKind::Unstack,
            )
        };
        let pose = self
            .uniform_free_pose(scene, mover, rng)
            .ok_or(SimFailure::NoRelocation)?;
        Ok(Action::new(scene.id_at(mover), pose, kind))
    }

    /// An anchor with no goal of its own may sit where its region has no
    /// room, e.g. flush with the table edge. Move it instead of giving up.
    fn move_free_anchor<R: Rng + ?Sized>(
        &self,
        scene: &Scene,
        g: usize,
        fail: SimFailure,
        rng: &mut R,
    ) -> Result<Action, SimFailure> {
        let Some(a) = self.groups[g].anchor else {
            return Err(fail);
        };
        if self.groups.iter().any(|grp| grp.objects.contains(&a)) {
            return Err(fail);
        }
        self.clear_away(scene, a, ActionKind::Relocation, rng)
    }

    /// One simulation step for the next unplaced object of sub-goal `g`.
    pub fn simulate_step<R: Rng + ?Sized>(
        &self,
        state: &SearchState,
        g: usize,
        rng: &mut R,
    ) -> Result<Action, SimFailure> {
        let slot = state.next_slot(g).ok_or(SimFailure::Prior)?;
        let idx = self.groups[g].objects[slot];
        let scene = &state.scene;
        if !scene.reachable_at(idx) {
            let above = scene
                .blockers_above(scene.id_at(idx))
                .expect("index in scene");
            let reachable: Vec<usize> = above
                .iter()
                .map(|&id| scene.index_of(id).expect("blocker in scene"))
                .filter(|&j| scene.reachable_at(j))
                .collect();
            let pick = reachable[rng.random_range(0..reachable.len())];
            return self.clear_away(scene, pick, ActionKind::Unstack, rng);
        }
        let ctx = self.context(state, g);
        let tries = match ctx {
            Some(_) => self.config.pose_tries,
            None => 1,
        };
        let mut blocking: Vec<usize> = Vec::new();
        for _ in 0..tries {
            let pose = match (&ctx, &self.groups[g].target) {
                (Some(ctx), _) => match sample_prior(ctx, rng) {
                    Ok(p) => p,
                    Err(_) => return self.move_free_anchor(scene, g, SimFailure::Prior, rng),
                },
                (None, Target::Fixed(p)) => *p,
                (None, Target::Prior(_)) => unreachable!("prior groups always have a context"),
            };
            if scene.check_placement_at(idx, &pose).is_ok() {
                return Ok(Action::new(
                    scene.id_at(idx),
                    pose,
                    ActionKind::GoalPlacement,
                ));
            }
            let hits = scene.colliding_at(idx, &pose);
            if !hits.is_empty()
                && in_workspace(&scene.footprint_at(idx).place(&pose), scene.workspace())
            {
                blocking = hits;
            }
        }
        if blocking.is_empty() {
            return self.move_free_anchor(scene, g, SimFailure::NoFreePose, rng);
        }
        let obstacle = blocking[rng.random_range(0..blocking.len())];
        self.clear_away(scene, obstacle, ActionKind::Relocation, rng)
    }

    /// State after `action`; goal poses invalidated by the move are dropped.
    pub fn apply(&self, state: &SearchState, action: &Action) -> Option<SearchState> {
        let pose = action.pose();
        let scene = state.scene.apply_action(action.object, &pose).ok()?;
        let idx = scene.index_of(action.object)?;
        let mut placed = state.placed.clone();
        for (g, grp) in self.groups.iter().enumerate() {
            if grp.anchor == Some(idx) {
                placed[g].iter_mut().for_each(|p| *p = None);
                continue;
            }
            let Some(j) = grp.objects.iter().position(|&o| o == idx) else {
                continue;
            };
            if action.kind == ActionKind::GoalPlacement {
                placed[g][j] = Some(pose);
            } else if grp.met && grp.is_chained() {
                // start poses were never drawn from the curve; resample all
                placed[g].iter_mut().for_each(|p| *p = None);
            } else if grp.is_chained() {
                placed[g][j..].iter_mut().for_each(|p| *p = None);
            } else {
                placed[g][j] = None;
            }
        }
        Some(SearchState { scene, placed })
    }

    /// Run the search from the start scene.
    pub fn search(&self, seed: u64) -> Result<Plan, PlanError> {
        self.run(seed).0
    }

    fn run(&self, seed: u64) -> (Result<Plan, PlanError>, Vec<Node>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = self.total();
        let root_state = self.root_state();
        if root_state.is_complete() {
            let plan = Plan {
                seed,
                steps_used: 0,
                actions: Vec::new(),
            };
            return (Ok(plan), Vec::new());
        }
        let mut nodes = vec![self.node(root_state, None, None)];
        let mut steps = 0usize;
        let mut best = nodes[0].state.placed_count();
        let fail = |reason: &str, steps: usize, best: usize| {
            PlanError::Failed(PlanFailure {
                reason: reason.to_string(),
                steps_used: steps,
                best_reward: best,
                total,
            })
        };
        while steps < self.config.budget {
            // selection
            let mut cur = 0usize;
            let leaf = loop {
                let node = &nodes[cur];
                if node.dead {
                    break None;
                }
                if self.next_group(node).is_some() {
                    break Some(cur);
                }
                let live: Vec<usize> = node
                    .children
                    .iter()
                    .copied()
                    .filter(|&c| !nodes[c].dead)
                    .collect();
                if live.is_empty() {
                    nodes[cur].dead = true;
                    break None;
                }
                let stats: Vec<(f64, u32)> = live
                    .iter()
                    .map(|&c| (nodes[c].reward, nodes[c].visits))
                    .collect();
                let pick = ucb_select(&stats, node.visits, self.config.c).expect("live children");
                cur = live[pick];
            };
            let Some(leaf) = leaf else {
                if nodes[0].dead {
                    return (Err(fail("search space exhausted", steps, best)), nodes);
                }
                continue;
            };
            // expansion and simulation
            let g = self
                .next_group(&nodes[leaf])
                .expect("leaf has an open slot");
            nodes[leaf].slots_used[g] += 1;
            nodes[leaf].cursor = g + 1;
            steps += 1;
            let Ok(action) = self.simulate_step(&nodes[leaf].state, g, &mut rng) else {
                continue;
            };
            let Some(state) = self.apply(&nodes[leaf].state, &action) else {
                continue;
            };
            let reward = state.placed_count();
            best = best.max(reward);
            let complete = state.is_complete();
            let child = nodes.len();
            nodes.push(self.node(state, Some(leaf), Some(action)));
            nodes[leaf].children.push(child);
            // back-propagation
            let mut up = Some(leaf);
            while let Some(i) = up {
                nodes[i].visits += 1;
                nodes[i].reward += reward as f64;
                up = nodes[i].parent;
            }
            if complete {
                let mut actions = Vec::new();
                let mut at = Some(child);
                while let Some(i) = at {
                    actions.extend(nodes[i].action);
                    at = nodes[i].parent;
                }
                actions.reverse();
                let plan = Plan {
                    seed,
                    steps_used: steps,
                    actions,
                };
                return (Ok(plan), nodes);
            }
        }
        (Err(fail("budget exhausted", steps, best)), nodes)
    }

    fn node(&self, state: SearchState, parent: Option<usize>, action: Option<Action>) -> Node {
        let reward = state.placed_count() as f64;
        Node {
            state,
            parent,
            action,
            visits: 1,
            reward,
            children: Vec::new(),
            slots_used: vec![0; self.groups.len()],
            cursor: 0,
            dead: false,
        }
    }

    /// Next sub-goal with an unused expansion slot, round-robin from the
    /// node's cursor.
    fn next_group(&self, node: &Node) -> Option<usize> {
        let open = self.open(&node.state);
        let n = self.groups.len();
        (0..n)
            .map(|k| (node.cursor + k) % n)
            .find(|g| open.contains(g) && node.slots_used[*g] < self.config.width)
    }
}

/// Search for an action sequence reaching `goal`.
pub fn mcts_plan(
    scene: &Scene,
    goal: &GoalSpec,
    db: &PatternDb,
    config: &PlannerConfig,
    seed: u64,
) -> Result<Plan, PlanError> {
    Problem::from_goal(scene, goal, db, config)?.search(seed)
}

/// Search with every goal object's final pose given in advance.
pub fn pmcts_plan(
    scene: &Scene,
    fixed: &BTreeMap<ObjectId, Pose>,
    config: &PlannerConfig,
    seed: u64,
) -> Result<Plan, PlanError> {
    Problem::from_fixed(scene, fixed, config)?.search(seed)
}
