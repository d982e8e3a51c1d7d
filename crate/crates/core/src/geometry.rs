//! Planar poses, convex footprints and the collision predicates every
//! feasibility check is built on.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shrink applied to both polygons before the overlap test, in meters.
/// Edge-to-edge contact therefore counts as non-overlapping.
pub const COLLISION_EPS: f64 = 1e-6;

/// Slack used for inclusive workspace containment.
const BOUNDS_EPS: f64 = 1e-9;

const MIN_AREA: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("footprint needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("footprint area {0:.3e} m^2 is degenerate")]
    Degenerate(f64),
    #[error("footprint vertices must be counterclockwise")]
    Clockwise,
    #[error("footprint is not convex at vertex {0}")]
    NotConvex(usize),
    #[error("footprint centroid ({0:.6}, {1:.6}) is not at the local origin")]
    NotCentered(f64, f64),
    #[error("non-finite coordinate in footprint")]
    NonFinite,
    #[error("invalid workspace bounds: x [{x_min}, {x_max}], y [{y_min}, {y_max}]")]
    InvalidWorkspace {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t <= -PI {
        t += TAU;
    } else if t > PI {
        t -= TAU;
    }
    t
}

/// Planar pose plus a discrete stack level (0 = resting on the table).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPose", into = "RawPose")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    theta: f64,
    pub level: u32,
}

#[derive(Serialize, Deserialize)]
struct RawPose {
    x: f64,
    y: f64,
    theta: f64,
    level: u32,
}

impl From<RawPose> for Pose {
    fn from(r: RawPose) -> Self {
        Pose::new(r.x, r.y, r.theta, r.level)
    }
}

impl From<Pose> for RawPose {
    fn from(p: Pose) -> Self {
        RawPose {
            x: p.x,
            y: p.y,
            theta: p.theta,
            level: p.level,
        }
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64, level: u32) -> Self {
        Pose {
            x,
            y,
            theta: normalize_angle(theta),
            level,
        }
    }

    pub fn planar(x: f64, y: f64, theta: f64) -> Self {
        Pose::new(x, y, theta, 0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Pose::new(self.x, self.y, theta, self.level)
    }

    pub fn with_level(self, level: u32) -> Self {
        Pose { level, ..self }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Apply this pose as a rigid transform to a local point.
    pub fn transform_point(&self, p: Vec2) -> Vec2 {
        p.rotate(self.theta) + self.position()
    }

    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        self.level == other.level
            && (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && normalize_angle(self.theta - other.theta).abs() <= tol
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Aabb { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    /// Intersection, or `None` if it has no interior.
    pub fn intersect(&self, o: &Aabb) -> Option<Aabb> {
        let min = Vec2::new(self.min.x.max(o.min.x), self.min.y.max(o.min.y));
        let max = Vec2::new(self.max.x.min(o.max.x), self.max.y.min(o.max.y));
        (min.x < max.x && min.y < max.y).then_some(Aabb { min, max })
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }
}

/// Rectangular table region objects must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Workspace {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, GeometryError> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite())
            && x_min < x_max
            && y_min < y_max;
        if !ok {
            return Err(GeometryError::InvalidWorkspace {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Workspace {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        Workspace::new(self.x_min, self.x_max, self.y_min, self.y_max).map(|_| ())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(
            Vec2::new(self.x_min, self.y_min),
            Vec2::new(self.x_max, self.y_max),
        )
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        self.bounds().contains(p, BOUNDS_EPS)
    }
}

/// Convex, counterclockwise object outline in its local frame, centroid at
/// the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    vertices: Vec<Vec2>,
    area: f64,
    radius: f64,
}

impl Footprint {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        let (area, centroid) = validate_polygon(&vertices)?;
        let scale = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if centroid.norm() > 1e-6 * scale.max(1.0) {
            return Err(GeometryError::NotCentered(centroid.x, centroid.y));
        }
        Ok(Footprint {
            radius: scale,
            vertices,
            area,
        })
    }

    /// Validate, then shift the outline so its centroid sits at the origin.
    pub fn centered(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        let (_, c) = validate_polygon(&vertices)?;
        Footprint::new(vertices.into_iter().map(|v| v - c).collect())
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        let (hx, hy) = (0.5 * width, 0.5 * height);
        Footprint::new(vec![
            Vec2::new(-hx, -hy),
            Vec2::new(hx, -hy),
            Vec2::new(hx, hy),
            Vec2::new(-hx, hy),
        ])
    }

    pub fn square(side: f64) -> Result<Self, GeometryError> {
        Footprint::rectangle(side, side)
    }

    /// Regular polygon with `n` vertices on a circle of radius `r`.
    pub fn regular(n: usize, r: f64) -> Result<Self, GeometryError> {
        let verts = (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        Footprint::centered(verts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Largest vertex distance from the local origin.
    pub fn circumradius(&self) -> f64 {
        self.radius
    }

    pub fn place(&self, pose: &Pose) -> Polygon {
        transform_footprint(self, pose)
    }
}

fn validate_polygon(vertices: &[Vec2]) -> Result<(f64, Vec2), GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    if vertices
        .iter()
        .any(|v| !v.x.is_finite() || !v.y.is_finite())
    {
        return Err(GeometryError::NonFinite);
    }
    let signed = signed_area(vertices);
    if signed.abs() <= MIN_AREA {
        return Err(GeometryError::Degenerate(signed.abs()));
    }
    if signed < 0.0 {
        return Err(GeometryError::Clockwise);
    }
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        let turn = (b - a).cross(c - b);
        let scale = (b - a).norm() * (c - b).norm();
        if turn < -1e-12 * scale.max(1e-12) {
            return Err(GeometryError::NotConvex((i + 1) % n));
        }
    }
    Ok((signed, centroid(vertices, signed)))
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

fn centroid(v: &[Vec2], area: f64) -> Vec2 {
    let n = v.len();
    let mut c = Vec2::ZERO;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let w = a.cross(b);
        c = c + (a + b) * w;
    }
    c * (1.0 / (6.0 * area))
}

/// A footprint placed in the table frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn aabb(&self) -> Aabb {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            min = Vec2::new(min.x.min(v.x), min.y.min(v.y));
            max = Vec2::new(max.x.max(v.x), max.y.max(v.y));
        }
        Aabb::new(min, max)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    /// Signed distance of `p` to the boundary, positive inside.
    pub fn inside_depth(&self, p: Vec2) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let e = self.vertices[(i + 1) % n] - a;
                e.cross(p - a) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| v.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            })
    }

    fn edge_normals(&self) -> impl Iterator<Item = Vec2> + '_ {
        let n = self.vertices.len();
        (0..n).filter_map(move |i| {
            let e = self.vertices[(i + 1) % n] - self.vertices[i];
            let len = e.norm();
            (len > 1e-15).then(|| Vec2::new(e.y / len, -e.x / len))
        })
    }

    /// Smallest interval overlap over all separating-axis candidates, after
    /// shrinking both polygons by `COLLISION_EPS`. Positive means the
    /// interiors intersect.
    pub fn penetration(&self, other: &Polygon) -> f64 {
        let mut depth = f64::INFINITY;
        for axis in self.edge_normals().chain(other.edge_normals()) {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            let overlap = a1.min(b1) - a0.max(b0) - 2.0 * COLLISION_EPS;
            if overlap <= 0.0 {
                return overlap;
            }
            depth = depth.min(overlap);
        }
        depth
    }

    /// Area of the intersection of two convex polygons.
    pub fn intersection_area(&self, other: &Polygon) -> f64 {
        let mut out = self.vertices.clone();
        let n = other.vertices.len();
        for i in 0..n {
            if out.is_empty() {
                return 0.0;
            }
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % n];
            let e = b - a;
            let input = std::mem::take(&mut out);
            let m = input.len();
            for j in 0..m {
                let cur = input[j];
                let prev = input[(j + m - 1) % m];
                let cur_in = e.cross(cur - a) >= 0.0;
                let prev_in = e.cross(prev - a) >= 0.0;
                if cur_in {
                    if !prev_in {
                        out.push(segment_line_hit(prev, cur, a, e));
                    }
                    out.push(cur);
                } else if prev_in {
                    out.push(segment_line_hit(prev, cur, a, e));
                }
            }
        }
        if out.len() < 3 {
            0.0
        } else {
            signed_area(&out).abs()
        }
    }
}

fn segment_line_hit(p: Vec2, q: Vec2, a: Vec2, e: Vec2) -> Vec2 {
    let d = q - p;
    let denom = e.cross(d);
    if denom.abs() < 1e-300 {
        return q;
    }
    let t = e.cross(a - p) / denom;
    p + d * t
}

/// Rotate by the pose heading, then translate by its position.
pub fn transform_footprint(f: &Footprint, p: &Pose) -> Polygon {
    Polygon {
        vertices: f.vertices.iter().map(|&v| p.transform_point(v)).collect(),
    }
}

/// True iff the interiors intersect by more than the collision tolerance.
pub fn footprints_overlap(a: &Polygon, b: &Polygon) -> bool {
    a.penetration(b) > 0.0
}

/// True iff every vertex lies inside the workspace (boundary inclusive).
pub fn in_workspace(f: &Polygon, w: &Workspace) -> bool {
    f.vertices.iter().all(|&v| w.contains_point(v))
}
