//! Breadth-first search over a discretized version of a tiny task.
//!
//! Each movable object may sit at its start pose or at any grid cell
//! center with heading 0 or pi/2 (plus any extra target poses). A move
//! takes one object to a placement that overlaps no other object. Objects
//! not declared movable stay where they are.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::Serialize;

use super::BenchError;
use crate::executor::check_goal;
use crate::geometry::{footprints_overlap, in_workspace, Pose};
use crate::instruction::GoalSpec;
use crate::patterns::PatternDb;
use crate::scene::{ObjectId, Scene};

pub const MAX_MOVABLE: usize = 3;
pub const MAX_CELLS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub nx: usize,
    pub ny: usize,
    /// Objects the search may move; `None` means all of them.
    pub movable: Option<Vec<ObjectId>>,
    pub tol_sigma_mult: f64,
    pub max_states: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            nx: 6,
            ny: 6,
            movable: None,
            tol_sigma_mult: crate::executor::DEFAULT_TOL_SIGMA,
            max_states: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleOutcome {
    pub solvable: bool,
    /// Fewest moves reaching the goal, when solvable.
    pub actions: Option<usize>,
    pub states: usize,
}

struct Space {
    base: Scene,
    movable: Vec<usize>,
    /// Candidate poses per movable object; index 0 is the start pose.
    placements: Vec<Vec<Pose>>,
    /// `clash[a][b][pa * len_b + pb]` for movable objects `a < b`.
    clash: Vec<Vec<Vec<bool>>>,
}

impl Space {
    fn build(
        scene: &Scene,
        cfg: &OracleConfig,
        extra: &BTreeMap<ObjectId, Pose>,
    ) -> Result<Space, BenchError> {
        if cfg.nx == 0 || cfg.ny == 0 || cfg.nx > MAX_CELLS || cfg.ny > MAX_CELLS {
            return Err(BenchError::Oracle(format!(
                "grid must be between 1x1 and {MAX_CELLS}x{MAX_CELLS}"
            )));
        }
        if scene.poses().any(|(_, p)| p.level != 0) {
            return Err(BenchError::Oracle(
                "stacked objects are not supported".into(),
            ));
        }
        let movable: Vec<usize> = match &cfg.movable {
            None => (0..scene.len()).collect(),
            Some(ids) => ids
                .iter()
                .map(|&id| {
                    scene
                        .index_of(id)
                        .ok_or_else(|| BenchError::Oracle(format!("unknown object {id}")))
                })
                .collect::<Result<_, _>>()?,
        };
        if movable.len() > MAX_MOVABLE {
            return Err(BenchError::Oracle(format!(
                "{} movable objects, at most {MAX_MOVABLE} supported",
                movable.len()
            )));
        }
        let fixed: Vec<usize> = (0..scene.len()).filter(|i| !movable.contains(i)).collect();
        let b = scene.workspace().bounds();
        let (cw, ch) = (b.width() / cfg.nx as f64, b.height() / cfg.ny as f64);
        let mut placements = Vec::new();
        for &m in &movable {
            let mut cands = vec![scene.pose_at(m)];
            if let Some(p) = extra.get(&scene.id_at(m)) {
                cands.push(*p);
            }
            for i in 0..cfg.nx {
                for j in 0..cfg.ny {
                    for theta in [0.0, std::f64::consts::FRAC_PI_2] {
                        cands.push(Pose::planar(
                            b.min.x + (i as f64 + 0.5) * cw,
                            b.min.y + (j as f64 + 0.5) * ch,
                            theta,
                        ));
                    }
                }
            }
            let fp = scene.footprint_at(m);
            let start = cands[0];
            let kept: Vec<Pose> = std::iter::once(start)
                .chain(cands.into_iter().skip(1).filter(|p| {
                    let poly = fp.place(p);
                    in_workspace(&poly, scene.workspace())
                        && fixed
                            .iter()
                            .all(|&f| !footprints_overlap(&poly, &scene.placed(f)))
                }))
                .collect();
            placements.push(kept);
        }
        let n = movable.len();
        let mut clash = vec![vec![Vec::new(); n]; n];
        for a in 0..n {
            for bi in a + 1..n {
                let fa = scene.footprint_at(movable[a]);
                let fb = scene.footprint_at(movable[bi]);
                let pb: Vec<_> = placements[bi].iter().map(|p| fb.place(p)).collect();
                let mut table = Vec::with_capacity(placements[a].len() * pb.len());
                for p in &placements[a] {
                    let pa = fa.place(p);
                    table.extend(pb.iter().map(|q| footprints_overlap(&pa, q)));
                }
                clash[a][bi] = table;
            }
        }
        Ok(Space {
            base: scene.clone(),
            movable,
            placements,
            clash,
        })
    }

    fn clashes(&self, a: usize, pa: usize, b: usize, pb: usize) -> bool {
        let (a, pa, b, pb) = if a < b {
            (a, pa, b, pb)
        } else {
            (b, pb, a, pa)
        };
        self.clash[a][b][pa * self.placements[b].len() + pb]
    }

    fn scene_for(&self, state: &[usize]) -> Scene {
        let mut poses: Vec<Pose> = self.base.poses().map(|(_, p)| p).collect();
        for (k, &m) in self.movable.iter().enumerate() {
            poses[m] = self.placements[k][state[k]];
        }
        self.base.with_poses_unchecked(poses)
    }

    fn search(
        &self,
        max_states: usize,
        goal: impl Fn(&[usize], &Scene) -> bool,
    ) -> Result<OracleOutcome, BenchError> {
        let n = self.movable.len();
        let start = vec![0usize; n];
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back((start, 0usize));
        while let Some((state, depth)) = queue.pop_front() {
            if goal(&state, &self.scene_for(&state)) {
                return Ok(OracleOutcome {
                    solvable: true,
                    actions: Some(depth),
                    states: seen.len(),
                });
            }
            for k in 0..n {
                for p in 0..self.placements[k].len() {
                    if p == state[k] || (0..n).any(|o| o != k && self.clashes(k, p, o, state[o])) {
                        continue;
                    }
                    let mut next = state.clone();
                    next[k] = p;
                    if seen.insert(next.clone()) {
                        if seen.len() > max_states {
                            return Err(BenchError::Oracle("oracle overflow".into()));
                        }
                        queue.push_back((next, depth + 1));
                    }
                }
            }
        }
        Ok(OracleOutcome {
            solvable: false,
            actions: None,
            states: seen.len(),
        })
    }
}

/// Decide a goal over the grid. Pattern tolerances are widened so that
/// snapping to cell centers alone cannot break a fit.
pub fn oracle_solve(
    scene: &Scene,
    goal: &GoalSpec,
    db: &PatternDb,
    cfg: &OracleConfig,
) -> Result<OracleOutcome, BenchError> {
    let space = Space::build(scene, cfg, &BTreeMap::new())?;
    let b = scene.workspace().bounds();
    let cell = (b.width() / cfg.nx as f64).max(b.height() / cfg.ny as f64);
    let mut grid_db = db.clone();
    let floor = 0.5 * cell / cfg.tol_sigma_mult;
    let priors: Vec<_> = grid_db
        .priors()
        .iter()
        .map(|p| p.clone().with_sigma(p.sigma.max(floor)))
        .collect();
    grid_db = PatternDb::from_priors(priors).map_err(|e| BenchError::Oracle(e.to_string()))?;
    space.search(cfg.max_states, |_, s| {
        check_goal(s, goal, &grid_db, cfg.tol_sigma_mult).ok
    })
}

/// Decide whether every object in `targets` can reach its exact pose.
pub fn oracle_solve_fixed(
    scene: &Scene,
    targets: &BTreeMap<ObjectId, Pose>,
    cfg: &OracleConfig,
) -> Result<OracleOutcome, BenchError> {
    let space = Space::build(scene, cfg, targets)?;
    let want: Vec<(usize, Pose)> = targets
        .iter()
        .map(|(id, p)| {
            let idx = scene
                .index_of(*id)
                .ok_or_else(|| BenchError::Oracle(format!("unknown object {id}")))?;
            let k = space
                .movable
                .iter()
                .position(|&m| m == idx)
                .ok_or_else(|| BenchError::Oracle(format!("{id} is not movable")))?;
            Ok((k, *p))
        })
        .collect::<Result<_, BenchError>>()?;
    space.search(cfg.max_states, |state, _| {
        want.iter()
            .all(|&(k, p)| space.placements[k][state[k]].approx_eq(&p, 1e-9))
    })
}
