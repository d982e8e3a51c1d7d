//! Parametric geometric priors over object poses.
//!
//! Each pattern is a curve family `gamma(t, kappa)` whose parameters `kappa`
//! are fixed by the first two sampled poses of a sub-goal. Poses are drawn
//! sequentially: the first anywhere in the workspace, the second within
//! `delta` of the first, every later one near its slot on the curve.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Footprint, Pose, Vec2, Workspace};

/// Gaussian curve noise is truncated at this many standard deviations
/// (radially), which keeps every prior's support compact.
pub const NOISE_TRUNCATION: f64 = 4.0;

const DEGENERATE_LEN: f64 = 1e-6;
const DEFAULT_LATERAL_MARGIN: f64 = 0.05;
const DISC_TRIES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("sub-goal already fully sampled")]
    Exhausted,
    #[error("degenerate curve: first two poses are {0:.3e} m apart")]
    DegenerateCurve(f64),
    #[error("infeasible region")]
    InfeasibleRegion,
    #[error("spatial pattern `{0}` needs an anchor")]
    MissingAnchor(String),
    #[error("unknown pattern family `{0}`")]
    UnknownFamily(String),
    #[error("invalid pattern parameter: {0}")]
    InvalidParameter(String),
    #[error("pattern database: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Left,
    Right,
    Front,
    Behind,
    LeftFront,
    LeftBehind,
    RightFront,
    RightBehind,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::Left,
        Relation::Right,
        Relation::Front,
        Relation::Behind,
        Relation::LeftFront,
        Relation::LeftBehind,
        Relation::RightFront,
        Relation::RightBehind,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Behind => "behind",
            Relation::LeftFront => "left_front",
            Relation::LeftBehind => "left_behind",
            Relation::RightFront => "right_front",
            Relation::RightBehind => "right_behind",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.tag() == tag)
    }

    /// -1 for left (-x), +1 for right (+x).
    fn x_side(self) -> Option<f64> {
        match self {
            Relation::Left | Relation::LeftFront | Relation::LeftBehind => Some(-1.0),
            Relation::Right | Relation::RightFront | Relation::RightBehind => Some(1.0),
            _ => None,
        }
    }

    /// -1 for front (-y), +1 for behind (+y).
    fn y_side(self) -> Option<f64> {
        match self {
            Relation::Front | Relation::LeftFront | Relation::RightFront => Some(-1.0),
            Relation::Behind | Relation::LeftBehind | Relation::RightBehind => Some(1.0),
            _ => None,
        }
    }

    /// The same relation seen in a scene mirrored across a vertical axis.
    pub fn mirrored_x(self) -> Relation {
        match self {
            Relation::Left => Relation::Right,
            Relation::Right => Relation::Left,
            Relation::LeftFront => Relation::RightFront,
            Relation::RightFront => Relation::LeftFront,
            Relation::LeftBehind => Relation::RightBehind,
            Relation::RightBehind => Relation::LeftBehind,
            r => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Line,
    Circle,
    Rectangle,
    Tower,
    Spatial(Relation),
}

impl Family {
    pub fn from_name(name: &str) -> Option<Family> {
        match name {
            "line" => Some(Family::Line),
            "circle" => Some(Family::Circle),
            "rectangle" => Some(Family::Rectangle),
            "tower" => Some(Family::Tower),
            _ => name
                .strip_prefix("spatial:")
                .and_then(Relation::from_tag)
                .map(Family::Spatial),
        }
    }

    pub fn name(self) -> String {
        match self {
            Family::Line => "line".into(),
            Family::Circle => "circle".into(),
            Family::Rectangle => "rectangle".into(),
            Family::Tower => "tower".into(),
            Family::Spatial(r) => format!("spatial:{}", r.tag()),
        }
    }

    pub fn is_spatial(self) -> bool {
        matches!(self, Family::Spatial(_))
    }

    pub fn is_curve(self) -> bool {
        matches!(self, Family::Line | Family::Circle | Family::Rectangle)
    }

    fn default_keys(self) -> Vec<&'static str> {
        match self {
            Family::Line => vec!["line", "row", "straight", "column", "queue", "linear"],
            Family::Circle => vec!["circle", "ring", "round", "circular", "loop"],
            Family::Rectangle => vec!["rectangle", "rect", "rectangular", "square", "frame"],
            Family::Tower => vec!["tower", "stack", "pile", "stacked", "on top of"],
            Family::Spatial(r) => match r {
                Relation::Left => vec!["left", "left of", "to the left"],
                Relation::Right => vec!["right", "right of", "to the right"],
                Relation::Front => vec!["front", "in front of", "before"],
                Relation::Behind => vec!["behind", "back", "rear", "in back of"],
                Relation::LeftFront => vec!["left front", "front left", "left_front"],
                Relation::LeftBehind => {
                    vec!["left behind", "behind left", "left back", "left_behind"]
                }
                Relation::RightFront => vec!["right front", "front right", "right_front"],
                Relation::RightBehind => {
                    vec!["right behind", "behind right", "right back", "right_behind"]
                }
            },
        }
    }

    pub fn builtin() -> Vec<Family> {
        let mut all = vec![
            Family::Line,
            Family::Circle,
            Family::Rectangle,
            Family::Tower,
        ];
        all.extend(Relation::ALL.into_iter().map(Family::Spatial));
        all
    }
}

/// Family-specific knobs beyond `delta` and `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternParams {
    /// Line length as a multiple of the first two poses' distance. `None`
    /// uses the sub-goal size, which puts sample `k` at `p0 + k (p1 - p0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch: Option<f64>,
    pub gap_min: f64,
    pub gap_max: f64,
    pub lateral_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternPrior {
    pub name: String,
    pub keys: Vec<String>,
    pub ordered: bool,
    pub delta: f64,
    pub sigma: f64,
    pub family: Family,
    pub params: PatternParams,
}

impl PatternPrior {
    /// Built-in prior with workspace-relative defaults.
    pub fn builtin(family: Family, ws: &Workspace) -> PatternPrior {
        let diag = ws.diagonal();
        PatternPrior {
            name: family.name(),
            keys: family
                .default_keys()
                .into_iter()
                .map(String::from)
                .collect(),
            ordered: family == Family::Tower,
            delta: 0.25 * diag,
            sigma: 0.01 * diag,
            family,
            params: PatternParams {
                stretch: None,
                gap_min: 0.0,
                gap_max: 0.3 * ws.width(),
                lateral_margin: DEFAULT_LATERAL_MARGIN,
            },
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let bad = |what: &str| {
            Err(PatternError::InvalidParameter(format!(
                "{}: {what}",
                self.name
            )))
        };
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        let p = &self.params;
        if !(p.gap_min >= 0.0 && p.gap_max > p.gap_min && p.lateral_margin >= 0.0) {
            return bad("need 0 <= gap_min < gap_max and lateral_margin >= 0");
        }
        if matches!(p.stretch, Some(s) if !(s > 0.0 && s.is_finite())) {
            return bad("stretch must be positive");
        }
        Ok(())
    }

    /// Curve parameters from the first two sampled positions of a sub-goal
    /// with `total` objects.
    pub fn kappa(&self, p0: Vec2, p1: Vec2, total: usize) -> Result<Kappa, PatternError> {
        match self.family {
            Family::Line => {
                let stretch = self.params.stretch.unwrap_or(total as f64);
                line_kappa(p0, p1, stretch).map(Kappa::Line)
            }
            Family::Circle => circle_kappa(p0, p1).map(Kappa::Circle),
            Family::Rectangle => rectangle_kappa(p0, p1).map(Kappa::Rectangle),
            _ => Err(PatternError::UnknownFamily(self.name.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineKappa {
    pub origin: Vec2,
    pub dir: Vec2,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleKappa {
    pub center: Vec2,
    pub radius: f64,
    /// Angle of the `t = 0` point.
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleKappa {
    pub min: Vec2,
    pub max: Vec2,
    /// Corner at `t = 0`, counterclockwise index from the lower-left.
    pub start_corner: usize,
}

impl RectangleKappa {
    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.max.x - self.min.x) + (self.max.y - self.min.y))
    }

    fn corners(&self) -> [Vec2; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Line(LineKappa),
    Circle(CircleKappa),
    Rectangle(RectangleKappa),
}

impl Kappa {
    pub fn point(&self, t: f64) -> Vec2 {
        match self {
            Kappa::Line(k) => curve_gamma_line(t, k),
            Kappa::Circle(k) => curve_gamma_circle(t, k),
            Kappa::Rectangle(k) => curve_gamma_rectangle(t, k),
        }
    }

    /// Unit tangent (direction of increasing `t`).
    pub fn tangent(&self, t: f64) -> Vec2 {
        match self {
            Kappa::Line(k) => k.dir,
            Kappa::Circle(k) => {
                let a = k.phase + TAU * t;
                Vec2::new(-a.sin(), a.cos())
            }
            Kappa::Rectangle(k) => {
                let (edge, _) = rectangle_edge(t, k);
                let c = k.corners();
                let d = c[(edge + 1) % 4] - c[edge];
                let n = d.norm();
                if n > 0.0 {
                    d * (1.0 / n)
                } else {
                    Vec2::new(1.0, 0.0)
                }
            }
        }
    }
}

fn check_span(p0: Vec2, p1: Vec2) -> Result<f64, PatternError> {
    let d = p0.dist(p1);
    if d < DEGENERATE_LEN {
        Err(PatternError::DegenerateCurve(d))
    } else {
        Ok(d)
    }
}

pub fn line_kappa(p0: Vec2, p1: Vec2, stretch: f64) -> Result<LineKappa, PatternError> {
    let d = check_span(p0, p1)?;
    Ok(LineKappa {
        origin: p0,
        dir: (p1 - p0) * (1.0 / d),
        length: stretch * d,
    })
}

/// `p0` and `p1` are diametrically opposite; `t = 0` sits at `p0`.
pub fn circle_kappa(p0: Vec2, p1: Vec2) -> Result<CircleKappa, PatternError> {
    let d = check_span(p0, p1)?;
    let center = (p0 + p1) * 0.5;
    Ok(CircleKappa {
        center,
        radius: 0.5 * d,
        phase: (p0 - center).angle(),
    })
}

/// Axis-aligned rectangle with opposite corners `p0` and `p1`.
pub fn rectangle_kappa(p0: Vec2, p1: Vec2) -> Result<RectangleKappa, PatternError> {
    check_span(p0, p1)?;
    let min = Vec2::new(p0.x.min(p1.x), p0.y.min(p1.y));
    let max = Vec2::new(p0.x.max(p1.x), p0.y.max(p1.y));
    let start_corner = match (p0.x <= p1.x, p0.y <= p1.y) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    };
    Ok(RectangleKappa {
        min,
        max,
        start_corner,
    })
}

pub fn curve_gamma_line(t: f64, k: &LineKappa) -> Vec2 {
    k.origin + k.dir * (t * k.length)
}

pub fn curve_gamma_circle(t: f64, k: &CircleKappa) -> Vec2 {
    let a = k.phase + TAU * t;
    k.center + Vec2::new(a.cos(), a.sin()) * k.radius
}

/// Edge index (from `start_corner`, CCW) and distance travelled along it.
/// A point exactly on a corner belongs to its incoming edge.
fn rectangle_edge(t: f64, k: &RectangleKappa) -> (usize, f64) {
    let c = k.corners();
    let mut s = t.clamp(0.0, 1.0) * k.perimeter();
    let mut edge = k.start_corner;
    for step in 0..4 {
        let len = c[edge].dist(c[(edge + 1) % 4]);
        if s <= len || step == 3 {
            if s <= 0.0 && step == 0 && t > 0.0 {
                break;
            }
            return (edge, s.min(len));
        }
        s -= len;
        edge = (edge + 1) % 4;
    }
    (edge, 0.0)
}

pub fn curve_gamma_rectangle(t: f64, k: &RectangleKappa) -> Vec2 {
    let c = k.corners();
    let (edge, s) = rectangle_edge(t, k);
    let a = c[edge];
    let b = c[(edge + 1) % 4];
    let len = a.dist(b);
    if len <= 0.0 {
        a
    } else {
        a + (b - a) * (s / len)
    }
}

/// Heading of the curve tangent at `t`.
pub fn tangent_angle(kappa: &Kappa, t: f64) -> f64 {
    kappa.tangent(t).angle()
}

/// Curve parameter of the `k`-th sample (`k >= 2`) of a sub-goal of size
/// `n`. Slots are `j / n`; for closed curves the slot at the far side
/// (`t = 1/2`) is where the second sample already sits, so later samples
/// skip it.
pub fn slot_parameter(family: Family, k: usize, n: usize) -> f64 {
    match family {
        Family::Circle | Family::Rectangle => {
            let skip = n / 2;
            let free: Vec<usize> = (1..n).filter(|&j| j != skip).collect();
            let j = free.get(k.saturating_sub(2)).copied().unwrap_or(k);
            j as f64 / n as f64
        }
        _ => k as f64 / n as f64,
    }
}

/// Placed anchor object for spatial relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub pose: Pose,
    pub bounds: Aabb,
}

impl Anchor {
    pub fn new(pose: Pose, footprint: &Footprint) -> Anchor {
        Anchor {
            pose,
            bounds: footprint.place(&pose).aabb(),
        }
    }
}

/// Band on the named side(s) of the anchor's bounding box, clipped to the
/// workspace. Single-sided relations are limited laterally to the anchor's
/// half extent plus a margin; pairwise relations intersect two bands.
pub fn spatial_region(
    relation: Relation,
    anchor: &Aabb,
    params: &PatternParams,
    ws: &Workspace,
) -> Result<Aabb, PatternError> {
    let (g0, g1) = (params.gap_min, params.gap_max);
    let c = anchor.center();
    let lateral_x = 0.5 * anchor.width() + params.lateral_margin;
    let lateral_y = 0.5 * anchor.height() + params.lateral_margin;
    let (x0, x1) = match relation.x_side() {
        Some(s) if s > 0.0 => (anchor.max.x + g0, anchor.max.x + g1),
        Some(_) => (anchor.min.x - g1, anchor.min.x - g0),
        None => (c.x - lateral_x, c.x + lateral_x),
    };
    let (y0, y1) = match relation.y_side() {
        Some(s) if s > 0.0 => (anchor.max.y + g0, anchor.max.y + g1),
        Some(_) => (anchor.min.y - g1, anchor.min.y - g0),
        None => (c.y - lateral_y, c.y + lateral_y),
    };
    Aabb::new(Vec2::new(x0, y0), Vec2::new(x1, y1))
        .intersect(&ws.bounds())
        .ok_or(PatternError::InfeasibleRegion)
}

/// State of one sub-goal's sequential sampling.
#[derive(Debug, Clone)]
pub struct SamplingContext<'a> {
    pub prior: &'a PatternPrior,
    pub workspace: Workspace,
    /// Number of objects in the sub-goal.
    pub total: usize,
    /// Poses already sampled, in sampling order.
    pub sampled: Vec<Pose>,
    pub anchor: Option<Anchor>,
}

impl<'a> SamplingContext<'a> {
    pub fn new(prior: &'a PatternPrior, workspace: Workspace, total: usize) -> Self {
        SamplingContext {
            prior,
            workspace,
            total,
            sampled: Vec::new(),
            anchor: None,
        }
    }

    pub fn with_sampled(mut self, sampled: Vec<Pose>) -> Self {
        self.sampled = sampled;
        self
    }

    pub fn with_anchor(mut self, anchor: Anchor) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn k(&self) -> usize {
        self.sampled.len()
    }

    pub fn region(&self) -> Result<Aabb, PatternError> {
        let Family::Spatial(rel) = self.prior.family else {
            return Err(PatternError::UnknownFamily(self.prior.name.clone()));
        };
        let anchor = self
            .anchor
            .ok_or_else(|| PatternError::MissingAnchor(self.prior.name.clone()))?;
        spatial_region(rel, &anchor.bounds, &self.prior.params, &self.workspace)
    }

    /// Curve parameters and the slot parameter for the next sample; only
    /// meaningful for curve families once two poses exist.
    pub fn curve_target(&self) -> Result<(Kappa, f64), PatternError> {
        let p0 = self.sampled[0].position();
        let p1 = self.sampled[1].position();
        let kappa = self.prior.kappa(p0, p1, self.total)?;
        Ok((
            kappa,
            slot_parameter(self.prior.family, self.k(), self.total),
        ))
    }
}

fn uniform_theta<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-PI..PI)
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, b: &Aabb) -> Vec2 {
    Vec2::new(
        rng.random_range(b.min.x..=b.max.x),
        rng.random_range(b.min.y..=b.max.y),
    )
}

/// Isotropic Gaussian offset truncated at `NOISE_TRUNCATION * sigma`.
pub fn truncated_noise<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec2 {
    loop {
        let e = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        if e.norm() <= NOISE_TRUNCATION {
            return e * sigma;
        }
    }
}

fn gaussian_bump(d: f64, sigma: f64) -> f64 {
    if d <= NOISE_TRUNCATION * sigma {
        (-d * d / (2.0 * sigma * sigma)).exp()
    } else {
        0.0
    }
}

/// Draw the next pose of the sub-goal.
pub fn sample_prior<R: Rng + ?Sized>(
    ctx: &SamplingContext<'_>,
    rng: &mut R,
) -> Result<Pose, PatternError> {
    let k = ctx.k();
    if k >= ctx.total {
        return Err(PatternError::Exhausted);
    }
    let ws = ctx.workspace.bounds();
    let prior = ctx.prior;
    match prior.family {
        Family::Spatial(_) => {
            let region = ctx.region()?;
            let p = uniform_in(rng, &region);
            Ok(Pose::planar(p.x, p.y, uniform_theta(rng)))
        }
        _ if k == 0 => {
            let p = uniform_in(rng, &ws);
            Ok(Pose::planar(p.x, p.y, uniform_theta(rng)))
        }
        Family::Tower => {
            let base = ctx.sampled[0].position();
            let p = base + truncated_noise(rng, prior.sigma);
            Ok(Pose::new(p.x, p.y, uniform_theta(rng), k as u32))
        }
        _ if k == 1 => {
            let c = ctx.sampled[0].position();
            let r = prior.delta;
            let square = Aabb::new(c - Vec2::new(r, r), c + Vec2::new(r, r));
            let Some(b) = square.intersect(&ws) else {
                return Err(PatternError::InfeasibleRegion);
            };
            for _ in 0..DISC_TRIES {
                let p = uniform_in(rng, &b);
                if p.dist(c) <= r {
                    return Ok(Pose::planar(p.x, p.y, uniform_theta(rng)));
                }
            }
            Err(PatternError::InfeasibleRegion)
        }
        _ => {
            let (kappa, t) = ctx.curve_target()?;
            let p = kappa.point(t) + truncated_noise(rng, prior.sigma);
            Ok(Pose::planar(p.x, p.y, tangent_angle(&kappa, t)))
        }
    }
}

/// Unnormalized density of `pose` under the rule `sample_prior` draws from.
pub fn prior_density(ctx: &SamplingContext<'_>, pose: &Pose) -> f64 {
    let k = ctx.k();
    if k >= ctx.total {
        return 0.0;
    }
    let p = pose.position();
    let in_ws = ctx.workspace.contains_point(p);
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    let prior = ctx.prior;
    match prior.family {
        Family::Spatial(_) => match ctx.region() {
            Ok(r) => indicator(pose.level == 0 && r.contains(p, 1e-12)),
            Err(_) => 0.0,
        },
        _ if k == 0 => indicator(pose.level == 0 && in_ws),
        Family::Tower => {
            if pose.level as usize != k {
                return 0.0;
            }
            gaussian_bump(p.dist(ctx.sampled[0].position()), prior.sigma)
        }
        _ if k == 1 => {
            indicator(pose.level == 0 && in_ws && p.dist(ctx.sampled[0].position()) <= prior.delta)
        }
        _ => match ctx.curve_target() {
            Ok((kappa, t)) if pose.level == 0 => gaussian_bump(p.dist(kappa.point(t)), prior.sigma),
            _ => 0.0,
        },
    }
}

/// Named collection of priors the instruction resolver selects from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDb {
    priors: Vec<PatternPrior>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorOverride {
    name: String,
    #[serde(default)]
    keys: Option<Vec<String>>,
    #[serde(default)]
    ordered: Option<bool>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    params: Option<ParamsOverride>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsOverride {
    stretch: Option<f64>,
    gap_min: Option<f64>,
    gap_max: Option<f64>,
    lateral_margin: Option<f64>,
}

#[derive(Serialize)]
struct PriorRecord<'a> {
    name: &'a str,
    keys: &'a [String],
    ordered: bool,
    delta: f64,
    sigma: f64,
    params: &'a PatternParams,
}

impl PatternDb {
    pub fn builtin(ws: &Workspace) -> PatternDb {
        PatternDb {
            priors: Family::builtin()
                .into_iter()
                .map(|f| PatternPrior::builtin(f, ws))
                .collect(),
        }
    }

    pub fn from_priors(priors: Vec<PatternPrior>) -> Result<PatternDb, PatternError> {
        for p in &priors {
            p.validate()?;
        }
        Ok(PatternDb { priors })
    }

    /// Built-in priors with per-pattern overrides from a JSON list.
    pub fn from_json(text: &str, ws: &Workspace) -> Result<PatternDb, PatternError> {
        let overrides: Vec<PriorOverride> =
            serde_json::from_str(text).map_err(|e| PatternError::Json(e.to_string()))?;
        let mut db = PatternDb::builtin(ws);
        for o in overrides {
            let family = Family::from_name(&o.name)
                .ok_or_else(|| PatternError::UnknownFamily(o.name.clone()))?;
            let prior = db
                .priors
                .iter_mut()
                .find(|p| p.family == family)
                .expect("builtin covers every family");
            if let Some(keys) = o.keys {
                prior.keys = keys;
            }
            if let Some(v) = o.ordered {
                prior.ordered = v;
            }
            if let Some(v) = o.delta {
                prior.delta = v;
            }
            if let Some(v) = o.sigma {
                prior.sigma = v;
            }
            if let Some(p) = o.params {
                if p.stretch.is_some() {
                    prior.params.stretch = p.stretch;
                }
                if let Some(v) = p.gap_min {
                    prior.params.gap_min = v;
                }
                if let Some(v) = p.gap_max {
                    prior.params.gap_max = v;
                }
                if let Some(v) = p.lateral_margin {
                    prior.params.lateral_margin = v;
                }
            }
            prior.validate()?;
        }
        Ok(db)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<PriorRecord<'_>> = self
            .priors
            .iter()
            .map(|p| PriorRecord {
                name: &p.name,
                keys: &p.keys,
                ordered: p.ordered,
                delta: p.delta,
                sigma: p.sigma,
                params: &p.params,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("pattern db serializes")
    }

    pub fn priors(&self) -> &[PatternPrior] {
        &self.priors
    }

    pub fn get(&self, name: &str) -> Option<&PatternPrior> {
        self.priors.iter().find(|p| p.name == name)
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        for p in &mut self.priors {
            p.sigma = sigma;
        }
    }

    pub fn set_delta(&mut self, delta: f64) {
        for p in &mut self.priors {
            p.delta = delta;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }
}
