//! Plan replay and goal verification, independent of the planner.
//!
//! `check_goal` looks only at final poses: it fits each sub-goal's pattern
//! to them and bounds the residuals by a multiple of the pattern's `sigma`.
//! When the least-squares fit misses, curves through pairs of the poses
//! (the shapes the sampler builds from its first two draws) are tried too.

use serde::{Deserialize, Serialize};

use crate::geometry::{footprints_overlap, Aabb, Vec2};
use crate::instruction::{GoalSpec, SubGoal};
use crate::patterns::{spatial_region, Family, PatternDb, PatternPrior};
use crate::planner::Plan;
use crate::scene::{ActionError, Scene, SceneFile};

pub const DEFAULT_TOL_SIGMA: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub ok: bool,
    pub failed_step: Option<usize>,
    pub reason: Option<ActionError>,
    pub final_scene: Scene,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    ok: bool,
    failed_step: Option<usize>,
    reason: Option<ActionError>,
    final_scene: SceneFile,
}

impl ReplayReport {
    pub fn to_json(&self) -> String {
        let file = ReportFile {
            ok: self.ok,
            failed_step: self.failed_step,
            reason: self.reason,
            final_scene: self.final_scene.to_file(),
        };
        serde_json::to_string_pretty(&file).expect("report serializes")
    }
}

/// Apply the plan's actions in order, stopping at the first one the scene
/// rejects.
pub fn replay(scene: &Scene, plan: &Plan) -> ReplayReport {
    let mut cur = scene.clone();
    for (i, a) in plan.actions.iter().enumerate() {
        match cur.apply_action(a.object, &a.pose()) {
            Ok(next) => cur = next,
            Err(e) => {
                return ReplayReport {
                    ok: false,
                    failed_step: Some(i),
                    reason: Some(e),
                    final_scene: cur,
                }
            }
        }
    }
    ReplayReport {
        ok: true,
        failed_step: None,
        reason: None,
        final_scene: cur,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalCheck {
    pub ok: bool,
    pub subgoals: Vec<bool>,
    pub collision_free: bool,
}

/// Verify the final arrangement against every sub-goal, plus pairwise
/// non-overlap of objects sharing a level.
pub fn check_goal(
    scene: &Scene,
    goal: &GoalSpec,
    db: &PatternDb,
    tol_sigma_mult: f64,
) -> GoalCheck {
    let subgoals: Vec<bool> = goal
        .subgoals
        .iter()
        .map(|g| check_subgoal(scene, g, db, tol_sigma_mult))
        .collect();
    let collision_free = collision_free(scene);
    GoalCheck {
        ok: collision_free && subgoals.iter().all(|&b| b),
        subgoals,
        collision_free,
    }
}

fn collision_free(scene: &Scene) -> bool {
    let polys: Vec<_> = (0..scene.len()).map(|i| scene.placed(i)).collect();
    for i in 0..scene.len() {
        for j in i + 1..scene.len() {
            if scene.pose_at(i).level == scene.pose_at(j).level
                && footprints_overlap(&polys[i], &polys[j])
            {
                return false;
            }
        }
    }
    true
}

pub fn check_subgoal(scene: &Scene, g: &SubGoal, db: &PatternDb, tol_sigma_mult: f64) -> bool {
    let Some(prior) = db.get(&g.pattern) else {
        return false;
    };
    let Ok(poses) = g
        .objects
        .iter()
        .map(|&id| scene.pose(id))
        .collect::<Result<Vec<_>, _>>()
    else {
        return false;
    };
    let pts: Vec<Vec2> = poses.iter().map(|p| p.position()).collect();
    let tol = tol_sigma_mult * prior.sigma;
    match prior.family {
        Family::Line => poses.iter().all(|p| p.level == 0) && line_fits(&pts, tol),
        Family::Circle => {
            poses.iter().all(|p| p.level == 0)
                && circle_fits(&pts, tol, scene.workspace().diagonal())
        }
        Family::Rectangle => poses.iter().all(|p| p.level == 0) && rectangle_fits(&pts, tol),
        Family::Tower => tower_holds(scene, g, &pts, tol),
        Family::Spatial(_) => spatial_holds(scene, g, prior, &pts),
    }
}

fn tower_holds(scene: &Scene, g: &SubGoal, pts: &[Vec2], tol: f64) -> bool {
    g.objects.iter().enumerate().all(|(k, &id)| {
        let level_ok = scene.pose(id).is_ok_and(|p| p.level as usize == k);
        let on_previous = k == 0 || scene.supporter(id).ok().flatten() == Some(g.objects[k - 1]);
        level_ok && on_previous && pts[k].dist(pts[0]) <= tol
    })
}

fn spatial_holds(scene: &Scene, g: &SubGoal, prior: &PatternPrior, pts: &[Vec2]) -> bool {
    let (Family::Spatial(rel), Some(anchor)) = (prior.family, g.anchor) else {
        return false;
    };
    let Some(ai) = scene.index_of(anchor) else {
        return false;
    };
    let bounds = scene.placed(ai).aabb();
    match spatial_region(rel, &bounds, &prior.params, scene.workspace()) {
        Ok(region) => pts.iter().all(|&p| region.contains(p, 1e-9)),
        Err(_) => false,
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

fn max_residual(pts: &[Vec2], f: impl Fn(Vec2) -> f64) -> f64 {
    pts.iter().map(|&p| f(p)).fold(0.0, f64::max)
}

fn line_residual(origin: Vec2, dir: Vec2, p: Vec2) -> f64 {
    (p - origin).cross(dir).abs()
}

/// Total-least-squares line through the centroid along the principal axis.
pub fn fit_line(pts: &[Vec2]) -> Option<(Vec2, Vec2)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &p in pts {
        let d = p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some((c, Vec2::new(angle.cos(), angle.sin())))
}

pub fn line_fits(pts: &[Vec2], tol: f64) -> bool {
    if pts.len() <= 2 {
        return true;
    }
    let (c, d) = fit_line(pts).expect("at least two points");
    if max_residual(pts, |p| line_residual(c, d, p)) <= tol {
        return true;
    }
    pairs(pts.len()).any(|(i, j)| {
        let span = pts[j] - pts[i];
        let len = span.norm();
        len > 1e-9 && max_residual(pts, |p| line_residual(pts[i], span * (1.0 / len), p)) <= tol
    })
}

/// Algebraic (Kasa) circle fit: center and radius.
pub fn fit_circle(pts: &[Vec2]) -> Option<(Vec2, f64)> {
    if pts.len() < 3 {
        return None;
    }
    // least squares for x^2 + y^2 + D x + E y + F = 0
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    for &p in pts {
        let row = [p.x, p.y, 1.0];
        let rhs = -(p.x * p.x + p.y * p.y);
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
            v[a] += row[a] * rhs;
        }
    }
    let [d, e, f] = solve3(m, v)?;
    let center = Vec2::new(-0.5 * d, -0.5 * e);
    let r2 = center.x * center.x + center.y * center.y - f;
    (r2 > 0.0).then(|| (center, r2.sqrt()))
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        v.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let k = m[row][col] / m[col][col];
                let pivot = m[col];
                for (x, p) in m[row].iter_mut().zip(pivot).skip(col) {
                    *x -= k * p;
                }
                v[row] -= k * v[col];
            }
        }
    }
    Some([v[0] / m[0][0], v[1] / m[1][1], v[2] / m[2][2]])
}

pub fn circle_fits(pts: &[Vec2], tol: f64, max_radius: f64) -> bool {
    if pts.len() <= 2 {
        return true;
    }
    let ok =
        |c: Vec2, r: f64| r <= max_radius && max_residual(pts, |p| (p.dist(c) - r).abs()) <= tol;
    if let Some((c, r)) = fit_circle(pts) {
        if ok(c, r) {
            return true;
        }
    }
    pairs(pts.len()).any(|(i, j)| ok((pts[i] + pts[j]) * 0.5, 0.5 * pts[i].dist(pts[j])))
}

/// Distance from `p` to the boundary of an axis-aligned rectangle.
pub fn perimeter_distance(r: &Aabb, p: Vec2) -> f64 {
    let dx = (r.min.x - p.x).max(p.x - r.max.x);
    let dy = (r.min.y - p.y).max(p.y - r.max.y);
    if dx <= 0.0 && dy <= 0.0 {
        -dx.max(dy)
    } else {
        Vec2::new(dx.max(0.0), dy.max(0.0)).norm()
    }
}

/// Axis-aligned rectangle fit by alternating side assignment and per-side
/// means, starting from the bounding box.
pub fn fit_rectangle(pts: &[Vec2]) -> Option<Aabb> {
    if pts.len() < 2 {
        return None;
    }
    let mut r = Aabb::new(
        Vec2::new(
            pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        ),
        Vec2::new(
            pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
        ),
    );
    for _ in 0..50 {
        let mut sums = [(0.0, 0usize); 4];
        for &p in pts {
            let d = [
                (p.x - r.min.x).abs(),
                (p.x - r.max.x).abs(),
                (p.y - r.min.y).abs(),
                (p.y - r.max.y).abs(),
            ];
            let side = (0..4)
                .min_by(|&a, &b| d[a].total_cmp(&d[b]))
                .expect("four sides");
            sums[side].0 += if side < 2 { p.x } else { p.y };
            sums[side].1 += 1;
        }
        let mean = |k: usize, old: f64| {
            if sums[k].1 > 0 {
                sums[k].0 / sums[k].1 as f64
            } else {
                old
            }
        };
        let next = Aabb::new(
            Vec2::new(mean(0, r.min.x), mean(2, r.min.y)),
            Vec2::new(mean(1, r.max.x), mean(3, r.max.y)),
        );
        if next == r {
            break;
        }
        r = next;
    }
    Some(r)
}

pub fn rectangle_fits(pts: &[Vec2], tol: f64) -> bool {
    if pts.len() <= 2 {
        return true;
    }
    let ok = |r: &Aabb| max_residual(pts, |p| perimeter_distance(r, p)) <= tol;
    if fit_rectangle(pts).is_some_and(|r| ok(&r)) {
        return true;
    }
    pairs(pts.len()).any(|(i, j)| {
        let (a, b) = (pts[i], pts[j]);
        let r = Aabb::new(
            Vec2::new(a.x.min(b.x), a.y.min(b.y)),
            Vec2::new(a.x.max(b.x), a.y.max(b.y)),
        );
        ok(&r)
    })
}
