//! SVG rendering of scenes, prior densities and plans.
//!
//! Output depends only on the inputs: fixed canvas size, fixed number
//! formatting, objects drawn in scene order with lower levels first.

use std::fmt::Write;

use lgplan_core::geometry::{Aabb, Pose, Vec2};
use lgplan_core::patterns::{prior_density, Family, SamplingContext};
use lgplan_core::planner::{ActionKind, Plan};
use lgplan_core::scene::Scene;

pub const GRID: usize = 64;
const CANVAS: f64 = 640.0;
const MARGIN: f64 = 20.0;

/// Prior density sampled at cell centers, row-major from the top-left,
/// scaled so the largest value is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub cells: Vec<f64>,
}

impl Heatmap {
    pub fn of_prior(ctx: &SamplingContext<'_>) -> Heatmap {
        let b = ctx.workspace.bounds();
        let level = match ctx.prior.family {
            Family::Tower => ctx.k() as u32,
            _ => 0,
        };
        let mut cells = Vec::with_capacity(GRID * GRID);
        for row in 0..GRID {
            for col in 0..GRID {
                let x = b.min.x + (col as f64 + 0.5) * b.width() / GRID as f64;
                let y = b.max.y - (row as f64 + 0.5) * b.height() / GRID as f64;
                cells.push(prior_density(ctx, &Pose::new(x, y, 0.0, level)));
            }
        }
        let max = cells.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            cells.iter_mut().for_each(|c| *c /= max);
        }
        Heatmap { cells }
    }

    /// 0 for black, 255 for white.
    pub fn gray(&self, row: usize, col: usize) -> u8 {
        (self.cells[row * GRID + col] * 255.0).round() as u8
    }
}

struct Frame {
    ws: Aabb,
    scale: f64,
}

impl Frame {
    fn new(ws: Aabb) -> Frame {
        let scale = (CANVAS - 2.0 * MARGIN) / ws.width().max(ws.height());
        Frame { ws, scale }
    }

    fn size(&self) -> (f64, f64) {
        (
            self.ws.width() * self.scale + 2.0 * MARGIN,
            self.ws.height() * self.scale + 2.0 * MARGIN,
        )
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (
            MARGIN + (p.x - self.ws.min.x) * self.scale,
            MARGIN + (self.ws.max.y - p.y) * self.scale,
        )
    }
}

fn fill_for(color: &str) -> &'static str {
    match color.to_ascii_lowercase().as_str() {
        "red" => "#d62728",
        "green" => "#2ca02c",
        "blue" => "#1f77b4",
        "yellow" => "#e5c300",
        "orange" => "#ff7f0e",
        "purple" => "#9467bd",
        "brown" => "#8c564b",
        "pink" => "#e377c2",
        "cyan" => "#17becf",
        "black" => "#303030",
        "white" => "#f4f4f4",
        "silver" => "#c0c0c0",
        "grey" | "gray" => "#8c8c8c",
        _ => "#b0b0b0",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub struct Arrow {
    pub number: usize,
    pub from: Vec2,
    pub to: Vec2,
    pub kind: ActionKind,
}

/// Arrows for the plan's actions, stopping at the first one the scene
/// rejects.
pub fn plan_arrows(scene: &Scene, plan: &Plan) -> Vec<Arrow> {
    let mut cur = scene.clone();
    let mut out = Vec::new();
    for (k, a) in plan.actions.iter().enumerate() {
        let Ok(from) = cur.pose(a.object) else { break };
        let Ok(next) = cur.apply_action(a.object, &a.pose()) else {
            break;
        };
        cur = next;
        out.push(Arrow {
            number: k + 1,
            from: from.position(),
            to: a.pose().position(),
            kind: a.kind,
        });
    }
    out
}

/// The scene, optionally over a prior heatmap and under numbered plan
/// arrows.
pub fn render(scene: &Scene, heat: Option<&Heatmap>, plan: Option<&Plan>) -> String {
    let arrows = plan.map(|p| plan_arrows(scene, p)).unwrap_or_default();
    render_with(scene, heat, &arrows)
}

pub fn render_with(scene: &Scene, heat: Option<&Heatmap>, arrows: &[Arrow]) -> String {
    let f = Frame::new(scene.workspace().bounds());
    let (w, h) = f.size();
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    )
    .unwrap();
    s.push_str(concat!(
        r#"<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" "#,
        r#"markerWidth="6" markerHeight="6" orient="auto-start-reverse">"#,
        r##"<path d="M0,0 L10,5 L0,10 z" fill="#202020"/></marker></defs>"##,
        "\n"
    ));
    let (x0, y0) = f.map(Vec2::new(f.ws.min.x, f.ws.max.y));
    let (ww, wh) = (f.ws.width() * f.scale, f.ws.height() * f.scale);
    writeln!(
        s,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{ww:.2}" height="{wh:.2}" fill="#fafafa" stroke="#404040"/>"##
    )
    .unwrap();
    if let Some(heat) = heat {
        let (cw, ch) = (ww / GRID as f64, wh / GRID as f64);
        s.push_str("<g id=\"prior\" shape-rendering=\"crispEdges\">\n");
        for row in 0..GRID {
            for col in 0..GRID {
                let g = heat.gray(row, col);
                writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{g:02x}{g:02x}{g:02x}"/>"##,
                    x0 + col as f64 * cw,
                    y0 + row as f64 * ch,
                    cw + 0.01,
                    ch + 0.01
                )
                .unwrap();
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("<g id=\"objects\">\n");
    let mut order: Vec<usize> = (0..scene.len()).collect();
    order.sort_by_key(|&i| scene.pose_at(i).level);
    for i in order {
        let o = &scene.objects()[i];
        let poly = scene.placed(i);
        let pts: Vec<String> = poly
            .vertices
            .iter()
            .map(|&v| {
                let (x, y) = f.map(v);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if scene.pose_at(i).level > 0 {
            r#" stroke-dasharray="4 2""#
        } else {
            ""
        };
        writeln!(
            s,
            r##"<polygon points="{}" fill="{}" fill-opacity="0.85" stroke="#202020"{dash}><title>{} {} ({})</title></polygon>"##,
            pts.join(" "),
            fill_for(&o.color),
            o.id,
            escape(&o.name),
            escape(&o.color)
        )
        .unwrap();
        let (cx, cy) = f.map(scene.pose_at(i).position());
        writeln!(
            s,
            r#"<text x="{cx:.2}" y="{cy:.2}" font-family="sans-serif" font-size="11" text-anchor="middle" dominant-baseline="middle">{}</text>"#,
            o.id
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    if !arrows.is_empty() {
        s.push_str("<g id=\"plan\">\n");
        for a in arrows {
            let (x1, y1) = f.map(a.from);
            let (x2, y2) = f.map(a.to);
            let stroke = match a.kind {
                ActionKind::GoalPlacement => "#202020",
                ActionKind::Relocation => "#a05000",
                ActionKind::Unstack => "#7030a0",
            };
            writeln!(
                s,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="2" marker-end="url(#head)"/>"#
            )
            .unwrap();
            let (mx, my) = ((x1 + x2) / 2.0, (y1 + y2) / 2.0);
            writeln!(
                s,
                r##"<circle cx="{mx:.2}" cy="{my:.2}" r="8" fill="#ffffff" stroke="{stroke}"/><text x="{mx:.2}" y="{my:.2}" font-family="sans-serif" font-size="10" text-anchor="middle" dominant-baseline="middle">{}</text>"##,
                a.number
            )
            .unwrap();
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// The start scene, then the scene after each applied action with that
/// action's arrow.
pub fn frames(scene: &Scene, plan: &Plan) -> Vec<String> {
    let mut out = vec![render(scene, None, None)];
    let mut cur = scene.clone();
    for arrow in plan_arrows(scene, plan) {
        let a = &plan.actions[arrow.number - 1];
        cur = cur
            .apply_action(a.object, &a.pose())
            .expect("arrow implies the action applies");
        out.push(render_with(&cur, None, &[arrow]));
    }
    out
}
