//! World state: objects, their poses and the support (stacking) relation.
//!
//! A [`Scene`] is an immutable snapshot. Object descriptions are shared
//! between snapshots, so cloning a scene only copies the pose vector.
//!
//! Stacks are chains: an object at level `k > 0` overlaps exactly one object
//! at level `k - 1` (its supporter), and every object supports at most one
//! object directly.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    footprints_overlap, in_workspace, Footprint, GeometryError, Polygon, Pose, Vec2, Workspace,
};

/// Fraction of the placed object's area that must rest on a lower object
/// for the placement to count as stacking.
pub const SUPPORT_OVERLAP_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: ObjectId,
    pub name: String,
    pub color: String,
    pub footprint: Footprint,
}

impl SceneObject {
    pub fn new(id: u32, name: &str, color: &str, footprint: Footprint) -> Self {
        SceneObject {
            id: ObjectId(id),
            name: name.to_string(),
            color: color.to_string(),
            footprint,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("no such object {0}")]
    UnknownObject(ObjectId),
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("object {0} has an empty name or color")]
    EmptyLabel(ObjectId),
    #[error("object {0} lies outside the workspace")]
    OutOfWorkspace(ObjectId),
    #[error("objects {0} and {1} overlap at level {2}")]
    Overlap(ObjectId, ObjectId, u32),
    #[error("object {0} at level {1} has no supporter")]
    Unsupported(ObjectId, u32),
    #[error("object {0} rests on more than one object")]
    AmbiguousSupport(ObjectId),
    #[error("object {0} supports more than one object")]
    MultipleOnTop(ObjectId),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

/// Why an action cannot be executed.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionError {
    #[error("blocked pick")]
    BlockedPick,
    #[error("blocked place")]
    BlockedPlace,
    #[error("out of bounds")]
    OutOfBounds,
    #[error("no such object")]
    UnknownObject,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: SceneError,
    },
}

impl LoadError {
    pub fn line(&self) -> usize {
        match self {
            LoadError::Syntax { line, .. } | LoadError::Invalid { line, .. } => *line,
        }
    }
}

#[derive(Debug)]
struct Catalog {
    objects: Vec<SceneObject>,
    index: BTreeMap<ObjectId, usize>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    workspace: Workspace,
    catalog: Arc<Catalog>,
    poses: Vec<Pose>,
    seed: u64,
}

/// Invalid-scene error located at an object position in the input list.
struct Located(usize, SceneError);

impl Scene {
    pub fn new(
        workspace: Workspace,
        entries: Vec<(SceneObject, Pose)>,
        seed: u64,
    ) -> Result<Scene, SceneError> {
        Scene::build(workspace, entries, seed).map_err(|Located(_, e)| e)
    }

    fn build(
        workspace: Workspace,
        entries: Vec<(SceneObject, Pose)>,
        seed: u64,
    ) -> Result<Scene, Located> {
        workspace.validate().map_err(|e| Located(0, e.into()))?;
        let mut index = BTreeMap::new();
        let mut objects = Vec::with_capacity(entries.len());
        let mut poses = Vec::with_capacity(entries.len());
        for (i, (obj, pose)) in entries.into_iter().enumerate() {
            if index.insert(obj.id, i).is_some() {
                return Err(Located(i, SceneError::DuplicateId(obj.id)));
            }
            if obj.name.trim().is_empty() || obj.color.trim().is_empty() {
                return Err(Located(i, SceneError::EmptyLabel(obj.id)));
            }
            objects.push(obj);
            poses.push(pose);
        }
        let scene = Scene {
            workspace,
            catalog: Arc::new(Catalog { objects, index }),
            poses,
            seed,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<(), Located> {
        let n = self.len();
        let placed: Vec<Polygon> = (0..n).map(|i| self.placed(i)).collect();
        for i in 0..n {
            let id = self.id_at(i);
            if !in_workspace(&placed[i], &self.workspace) {
                return Err(Located(i, SceneError::OutOfWorkspace(id)));
            }
            for j in 0..i {
                if self.poses[i].level == self.poses[j].level
                    && footprints_overlap(&placed[i], &placed[j])
                {
                    return Err(Located(
                        i,
                        SceneError::Overlap(self.id_at(j), id, self.poses[i].level),
                    ));
                }
            }
        }
        let mut on_top = vec![0usize; n];
        for i in 0..n {
            let level = self.poses[i].level;
            if level == 0 {
                continue;
            }
            let below: Vec<usize> = (0..n)
                .filter(|&j| {
                    self.poses[j].level + 1 == level && footprints_overlap(&placed[i], &placed[j])
                })
                .collect();
            match below.as_slice() {
                [] => return Err(Located(i, SceneError::Unsupported(self.id_at(i), level))),
                [s] => on_top[*s] += 1,
                _ => return Err(Located(i, SceneError::AmbiguousSupport(self.id_at(i)))),
            }
        }
        if let Some(s) = on_top.iter().position(|&c| c > 1) {
            return Err(Located(s, SceneError::MultipleOnTop(self.id_at(s))));
        }
        Ok(())
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Scene {
        self.seed = seed;
        self
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.catalog.objects
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.catalog.objects.iter().map(|o| o.id)
    }

    pub fn index_of(&self, id: ObjectId) -> Option<usize> {
        self.catalog.index.get(&id).copied()
    }

    fn require(&self, id: ObjectId) -> Result<usize, SceneError> {
        self.index_of(id).ok_or(SceneError::UnknownObject(id))
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.index_of(id).is_some()
    }

    pub fn object(&self, id: ObjectId) -> Result<&SceneObject, SceneError> {
        self.require(id).map(|i| &self.catalog.objects[i])
    }

    pub fn pose(&self, id: ObjectId) -> Result<Pose, SceneError> {
        self.require(id).map(|i| self.poses[i])
    }

    pub fn id_at(&self, idx: usize) -> ObjectId {
        self.catalog.objects[idx].id
    }

    pub fn pose_at(&self, idx: usize) -> Pose {
        self.poses[idx]
    }

    pub fn poses(&self) -> impl Iterator<Item = (ObjectId, Pose)> + '_ {
        self.catalog
            .objects
            .iter()
            .zip(&self.poses)
            .map(|(o, p)| (o.id, *p))
    }

    pub fn placed(&self, idx: usize) -> Polygon {
        self.catalog.objects[idx].footprint.place(&self.poses[idx])
    }

    pub fn footprint_at(&self, idx: usize) -> &Footprint {
        &self.catalog.objects[idx].footprint
    }

    /// Cheap bounding-circle rejection before the exact polygon test.
    fn may_touch(&self, a: usize, pa: &Pose, b: usize, pb: &Pose) -> bool {
        let r = self.footprint_at(a).circumradius() + self.footprint_at(b).circumradius();
        Vec2::new(pa.x - pb.x, pa.y - pb.y).norm() < r
    }

    fn overlap_at(&self, a: usize, pa: &Pose, b: usize, pb: &Pose) -> bool {
        self.may_touch(a, pa, b, pb)
            && footprints_overlap(
                &self.footprint_at(a).place(pa),
                &self.footprint_at(b).place(pb),
            )
    }

    /// Index of the object resting directly on `idx`, if any.
    fn on_top_of(&self, idx: usize) -> Option<usize> {
        let p = self.poses[idx];
        (0..self.len()).find(|&j| {
            j != idx
                && self.poses[j].level == p.level + 1
                && self.overlap_at(idx, &p, j, &self.poses[j])
        })
    }

    pub fn supporter(&self, id: ObjectId) -> Result<Option<ObjectId>, SceneError> {
        let i = self.require(id)?;
        let p = self.poses[i];
        if p.level == 0 {
            return Ok(None);
        }
        Ok((0..self.len())
            .find(|&j| {
                self.poses[j].level + 1 == p.level && self.overlap_at(i, &p, j, &self.poses[j])
            })
            .map(|j| self.id_at(j)))
    }

    pub(crate) fn reachable_at(&self, idx: usize) -> bool {
        self.on_top_of(idx).is_none()
    }

    /// True iff nothing is stacked on the object.
    pub fn is_reachable(&self, id: ObjectId) -> Result<bool, SceneError> {
        self.require(id).map(|i| self.reachable_at(i))
    }

    /// Everything stacked (transitively) on the object, topmost first.
    pub fn blockers_above(&self, id: ObjectId) -> Result<Vec<ObjectId>, SceneError> {
        let mut cur = self.require(id)?;
        let mut chain = Vec::new();
        while let Some(up) = self.on_top_of(cur) {
            chain.push(self.id_at(up));
            cur = up;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Objects at `pose.level` that the object would overlap at `pose`.
    pub fn collisions(&self, id: ObjectId, pose: &Pose) -> Result<Vec<ObjectId>, SceneError> {
        let i = self.require(id)?;
        Ok(self
            .colliding_at(i, pose)
            .into_iter()
            .map(|j| self.id_at(j))
            .collect())
    }

    pub(crate) fn colliding_at(&self, idx: usize, pose: &Pose) -> Vec<usize> {
        let placed = self.footprint_at(idx).place(pose);
        (0..self.len())
            .filter(|&j| {
                j != idx
                    && self.poses[j].level == pose.level
                    && self.may_touch(idx, pose, j, &self.poses[j])
                    && footprints_overlap(&placed, &self.placed(j))
            })
            .collect()
    }

    pub(crate) fn free_at(&self, idx: usize, pose: &Pose) -> bool {
        let placed = self.footprint_at(idx).place(pose);
        in_workspace(&placed, &self.workspace)
            && (0..self.len()).all(|j| {
                j == idx
                    || self.poses[j].level != pose.level
                    || !self.may_touch(idx, pose, j, &self.poses[j])
                    || !footprints_overlap(&placed, &self.placed(j))
            })
    }

    /// Collision-free factor: the object at `pose` stays in the workspace and
    /// overlaps nothing at the same level, ignoring its own current pose.
    pub fn f_free(&self, id: ObjectId, pose: &Pose) -> Result<bool, SceneError> {
        self.require(id).map(|i| self.free_at(i, pose))
    }

    /// The stack level a placement at `pose` resolves to: one above the
    /// highest reachable object covering at least half of the footprint,
    /// otherwise the table.
    pub fn implied_level(&self, id: ObjectId, pose: &Pose) -> Result<u32, SceneError> {
        self.require(id).map(|i| self.implied_level_at(i, pose))
    }

    pub(crate) fn implied_level_at(&self, idx: usize, pose: &Pose) -> u32 {
        let fp = self.footprint_at(idx);
        let placed = fp.place(pose);
        let need = SUPPORT_OVERLAP_FRACTION * fp.area();
        let mut best: Option<u32> = None;
        for j in 0..self.len() {
            if j == idx || !self.may_touch(idx, pose, j, &self.poses[j]) {
                continue;
            }
            // reachable once `idx` itself is lifted away
            if matches!(self.on_top_of(j), Some(t) if t != idx) {
                continue;
            }
            if placed.intersection_area(&self.placed(j)) >= need {
                let lvl = self.poses[j].level + 1;
                best = Some(best.map_or(lvl, |b| b.max(lvl)));
            }
        }
        best.unwrap_or(0)
    }

    pub(crate) fn check_placement_at(&self, idx: usize, pose: &Pose) -> Result<(), ActionError> {
        let placed = self.footprint_at(idx).place(pose);
        if !in_workspace(&placed, &self.workspace) {
            return Err(ActionError::OutOfBounds);
        }
        if self.implied_level_at(idx, pose) != pose.level {
            return Err(ActionError::BlockedPlace);
        }
        if !self.free_at(idx, pose) {
            return Err(ActionError::BlockedPlace);
        }
        // sliding under an overhang would give the upper object two supports
        let under = (0..self.len()).any(|j| {
            j != idx
                && self.poses[j].level == pose.level + 1
                && self.may_touch(idx, pose, j, &self.poses[j])
                && footprints_overlap(&placed, &self.placed(j))
        });
        if under {
            return Err(ActionError::BlockedPlace);
        }
        if pose.level > 0 {
            let below = (0..self.len())
                .filter(|&j| {
                    j != idx
                        && self.poses[j].level + 1 == pose.level
                        && self.may_touch(idx, pose, j, &self.poses[j])
                        && footprints_overlap(&placed, &self.placed(j))
                })
                .count();
            if below != 1 {
                return Err(ActionError::BlockedPlace);
            }
        }
        Ok(())
    }

    /// Whether `apply_action(id, pose)` would succeed.
    pub fn check_action(&self, id: ObjectId, pose: &Pose) -> Result<(), ActionError> {
        let i = self.index_of(id).ok_or(ActionError::UnknownObject)?;
        if !self.reachable_at(i) {
            return Err(ActionError::BlockedPick);
        }
        self.check_placement_at(i, pose)
    }

    /// Pick the object and place it at `pose`, returning the new snapshot.
    pub fn apply_action(&self, id: ObjectId, pose: &Pose) -> Result<Scene, ActionError> {
        self.check_action(id, pose)?;
        let i = self.index_of(id).ok_or(ActionError::UnknownObject)?;
        Ok(self.moved(i, *pose))
    }

    pub(crate) fn moved(&self, idx: usize, pose: Pose) -> Scene {
        let mut next = self.clone();
        next.poses[idx] = pose;
        next
    }

    /// Same objects, different poses; no invariant checks.
    pub(crate) fn with_poses_unchecked(&self, poses: Vec<Pose>) -> Scene {
        debug_assert_eq!(poses.len(), self.len());
        Scene {
            poses,
            ..self.clone()
        }
    }

    /// Re-run the full invariant check on this snapshot.
    pub fn check_invariants(&self) -> Result<(), SceneError> {
        self.validate().map_err(|Located(_, e)| e)
    }

    /// Field-wise comparison with poses to `tol` meters / radians. The seed
    /// is ignored.
    pub fn approx_eq(&self, other: &Scene, tol: f64) -> bool {
        self.workspace == other.workspace
            && self.catalog.objects == other.catalog.objects
            && self
                .poses
                .iter()
                .zip(&other.poses)
                .all(|(a, b)| a.approx_eq(b, tol))
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            workspace: self.workspace,
            objects: self
                .catalog
                .objects
                .iter()
                .zip(&self.poses)
                .map(|(o, p)| ObjectEntry {
                    id: o.id.0,
                    name: o.name.clone(),
                    color: o.color.clone(),
                    footprint: o.footprint.vertices().iter().map(|v| [v.x, v.y]).collect(),
                    pose: *p,
                })
                .collect(),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scene serializes")
    }

    /// Parse and validate a scene file. Errors carry the line of the
    /// offending JSON text or object entry.
    pub fn from_json(text: &str) -> Result<Scene, LoadError> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| LoadError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let lines = object_entry_lines(text);
        let line_of = |i: usize| lines.get(i).copied().unwrap_or(1);
        let mut entries = Vec::with_capacity(file.objects.len());
        for (i, o) in file.objects.into_iter().enumerate() {
            let verts = o.footprint.iter().map(|v| Vec2::new(v[0], v[1])).collect();
            let fp = Footprint::new(verts).map_err(|e| LoadError::Invalid {
                line: line_of(i),
                source: e.into(),
            })?;
            entries.push((SceneObject::new(o.id, &o.name, &o.color, fp), o.pose));
        }
        Scene::build(file.workspace, entries, file.seed).map_err(|Located(i, source)| {
            let line = match source {
                SceneError::Geometry(GeometryError::InvalidWorkspace { .. }) => {
                    key_line(text, "\"workspace\"")
                }
                _ => line_of(i),
            };
            LoadError::Invalid { line, source }
        })
    }
}

/// On-disk scene layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub workspace: Workspace,
    pub objects: Vec<ObjectEntry>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub id: u32,
    pub name: String,
    pub color: String,
    pub footprint: Vec<[f64; 2]>,
    pub pose: Pose,
}

fn key_line(text: &str, key: &str) -> usize {
    text.find(key)
        .map(|off| text[..off].matches('\n').count() + 1)
        .unwrap_or(1)
}

/// Line numbers where each element of the top-level `"objects"` array
/// starts. Assumes the text already parsed as valid JSON.
fn object_entry_lines(text: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut lines = Vec::new();
    let mut line = 1;
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    let mut last_key = String::new();
    let mut key_start = None;
    let mut objects_depth: Option<i32> = None;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            line += 1;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
                if let Some(s) = key_start.take() {
                    last_key = text[s..i].to_string();
                }
            }
            continue;
        }
        match b {
            b'"' => {
                in_string = true;
                key_start = Some(i + 1);
            }
            b'{' | b'[' => {
                depth += 1;
                if b == b'[' && depth == 2 && last_key == "objects" {
                    objects_depth = Some(depth);
                } else if b == b'{' && objects_depth == Some(depth - 1) {
                    lines.push(line);
                }
            }
            b'}' | b']' => {
                if objects_depth == Some(depth) && b == b']' {
                    objects_depth = None;
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> Workspace {
        Workspace::new(0.0, 10.0, 0.0, 10.0).unwrap()
    }

    fn block(id: u32) -> SceneObject {
        SceneObject::new(
            id,
            &format!("block{id}"),
            "red",
            Footprint::square(1.0).unwrap(),
        )
    }

    fn tower3() -> Scene {
        Scene::new(
            ws(),
            vec![
                (block(1), Pose::new(2.0, 2.0, 0.0, 0)),
                (block(2), Pose::new(2.0, 2.0, 0.0, 1)),
                (block(3), Pose::new(2.1, 2.0, 0.0, 2)),
                (block(4), Pose::new(6.0, 6.0, 0.0, 0)),
                (block(5), Pose::new(6.0, 6.0, 0.0, 1)),
            ],
            9,
        )
        .unwrap()
    }

    #[test]
    fn reachability() {
        let s = tower3();
        assert!(!s.is_reachable(ObjectId(1)).unwrap());
        assert!(!s.is_reachable(ObjectId(2)).unwrap());
        assert!(s.is_reachable(ObjectId(3)).unwrap());
        assert!(matches!(
            s.is_reachable(ObjectId(42)),
            Err(SceneError::UnknownObject(_))
        ));
        let single = Scene::new(ws(), vec![(block(1), Pose::planar(5.0, 5.0, 0.0))], 0).unwrap();
        assert!(single.is_reachable(ObjectId(1)).unwrap());
    }

    #[test]
    fn blockers() {
        let s = tower3();
        assert_eq!(
            s.blockers_above(ObjectId(1)).unwrap(),
            vec![ObjectId(3), ObjectId(2)]
        );
        assert_eq!(s.blockers_above(ObjectId(4)).unwrap(), vec![ObjectId(5)]);
        assert!(s.blockers_above(ObjectId(3)).unwrap().is_empty());
        assert!(s.blockers_above(ObjectId(9)).is_err());
    }

    #[test]
    fn apply_action_paths() {
        let s = tower3();
        let moved = s
            .apply_action(ObjectId(3), &Pose::planar(8.0, 2.0, 0.3))
            .unwrap();
        assert_eq!(s.pose(ObjectId(3)).unwrap().level, 2);
        assert_eq!(
            moved.pose(ObjectId(3)).unwrap(),
            Pose::planar(8.0, 2.0, 0.3)
        );
        assert_eq!(
            s.apply_action(ObjectId(1), &Pose::planar(8.0, 8.0, 0.0))
                .err(),
            Some(ActionError::BlockedPick)
        );
        // occupied cell at level 0, and the reachable occupant forces level 1
        assert_eq!(
            moved
                .apply_action(ObjectId(3), &Pose::planar(6.0, 6.0, 0.0))
                .err(),
            Some(ActionError::BlockedPlace)
        );
        assert_eq!(
            moved
                .apply_action(ObjectId(3), &Pose::planar(10.0, 6.0, 0.0))
                .err(),
            Some(ActionError::OutOfBounds)
        );
        // stacking onto the top of the second stack
        let stacked = moved
            .apply_action(ObjectId(3), &Pose::new(6.1, 6.0, 0.0, 2))
            .unwrap();
        assert_eq!(
            stacked.blockers_above(ObjectId(4)).unwrap(),
            vec![ObjectId(3), ObjectId(5)]
        );
        stacked.check_invariants().unwrap();
    }

    #[test]
    fn f_free_levels() {
        let s = tower3();
        let b2 = s.pose(ObjectId(2)).unwrap();
        assert!(s.f_free(ObjectId(2), &b2).unwrap());
        // coincident with block 4 at level 0
        assert!(!s.f_free(ObjectId(3), &Pose::planar(6.0, 6.0, 0.0)).unwrap());
        // over block 4 but one level up (where block 5 also sits)
        assert!(!s.f_free(ObjectId(3), &Pose::new(6.0, 6.0, 0.0, 1)).unwrap());
        assert!(s.f_free(ObjectId(3), &Pose::new(6.0, 6.0, 0.0, 2)).unwrap());
    }

    #[test]
    fn constructor_rejects_invalid() {
        let overlap = Scene::new(
            ws(),
            vec![
                (block(1), Pose::planar(2.0, 2.0, 0.0)),
                (block(2), Pose::planar(2.5, 2.0, 0.0)),
            ],
            0,
        );
        assert!(matches!(overlap, Err(SceneError::Overlap(..))));
        let floating = Scene::new(ws(), vec![(block(1), Pose::new(2.0, 2.0, 0.0, 1))], 0);
        assert!(matches!(floating, Err(SceneError::Unsupported(..))));
        let dup = Scene::new(
            ws(),
            vec![
                (block(1), Pose::planar(2.0, 2.0, 0.0)),
                (block(1), Pose::planar(5.0, 2.0, 0.0)),
            ],
            0,
        );
        assert!(matches!(dup, Err(SceneError::DuplicateId(_))));
        let small = |id| SceneObject::new(id, "s", "blue", Footprint::square(0.4).unwrap());
        let two_on_one = Scene::new(
            ws(),
            vec![
                (block(1), Pose::planar(2.0, 2.0, 0.0)),
                (small(2), Pose::new(1.75, 2.0, 0.0, 1)),
                (small(3), Pose::new(2.25, 2.0, 0.0, 1)),
            ],
            0,
        );
        assert!(matches!(two_on_one, Err(SceneError::MultipleOnTop(_))));
    }

    #[test]
    fn json_roundtrip_and_line_errors() {
        let s = tower3();
        let text = s.to_json();
        let back = Scene::from_json(&text).unwrap();
        assert!(back.approx_eq(&s, 0.0));
        assert_eq!(back.seed(), 9);

        let bad = text.replacen("\"level\": 2", "\"level\": 5", 1);
        let err = Scene::from_json(&bad).unwrap_err();
        let third_obj_line = object_entry_lines(&text)[2];
        assert_eq!(err.line(), third_obj_line);
        assert!(matches!(err, LoadError::Invalid { .. }));

        let syntax = text.replacen("\"seed\"", "\"sed\"", 1);
        assert!(matches!(
            Scene::from_json(&syntax),
            Err(LoadError::Syntax { .. })
        ));
    }
}
