//! Plain SVG drawing of a scenario and (optionally) a solution. Output uses
//! fixed-precision formatting so identical inputs give identical bytes.

use std::fmt::Write;

use crate::error::Result;
use crate::io::{Scenario, Solution};
use crate::world::Obstacle;

const SIZE: f64 = 600.0;

struct View {
    cx: f64,
    cy: f64,
    scale: f64,
}

impl View {
    fn x(&self, x: f64) -> f64 {
        SIZE / 2.0 + (x - self.cx) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        SIZE / 2.0 - (y - self.cy) * self.scale
    }

    fn pt(&self, p: [f64; 2]) -> String {
        format!("{:.2},{:.2}", self.x(p[0]), self.y(p[1]))
    }
}

fn points(view: &View, pts: impl IntoIterator<Item = [f64; 2]>) -> String {
    pts.into_iter().map(|p| view.pt(p)).collect::<Vec<_>>().join(" ")
}

/// Draws obstacles, the reference path, the solution's end-effector trace
/// and arm snapshots.
pub fn render_svg(scenario: &Scenario, solution: Option<&Solution>) -> Result<String> {
    let arm = &scenario.arm;
    let reach = arm.reach();
    let base = arm.base_pose;
    let view = View {
        cx: base.x,
        cy: base.y,
        scale: SIZE / (2.2 * reach.max(1e-6)),
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE:.0}" height="{SIZE:.0}" viewBox="0 0 {SIZE:.0} {SIZE:.0}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#dddddd" stroke-dasharray="4 4"/>"##,
        view.x(base.x),
        view.y(base.y),
        reach * view.scale
    );
    for o in &scenario.world.obstacles {
        match o {
            Obstacle::Circle { center, radius } => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#999999" stroke="#444444"/>"##,
                    view.x(center[0]),
                    view.y(center[1]),
                    radius * view.scale
                );
            }
            Obstacle::Polygon { vertices } => {
                let _ = writeln!(
                    s,
                    r##"<polygon points="{}" fill="#999999" stroke="#444444"/>"##,
                    points(&view, vertices.iter().copied())
                );
            }
        }
    }
    if let Some(sol) = solution {
        for q in &sol.snapshots {
            let links = arm.fk_links(q)?;
            let pts = std::iter::once(links[0].a).chain(links.iter().map(|l| l.b));
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#7f7f7f" stroke-width="2" stroke-opacity="0.6"/>"##,
                points(&view, pts)
            );
        }
    }
    let reference = scenario.reference_path.points().iter().map(|p| [p.x, p.y]);
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="3"/>"##,
        points(&view, reference)
    );
    if let Some(sol) = solution {
        let trace = sol.poses.iter().map(|p| [p.x, p.y]);
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
            points(&view, trace)
        );
    }
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#000000"/>"##,
        view.x(base.x),
        view.y(base.y)
    );
    s.push_str("</svg>\n");
    Ok(s)
}
