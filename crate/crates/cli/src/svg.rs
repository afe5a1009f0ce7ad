//! Plain SVG drawings of network snapshots.

use std::fmt::Write;

use anyhow::{bail, Result};
use lensflow_core::geometry::{add, scale};
use lensflow_core::{NetworkSnapshot, Point};

#[derive(Debug, Clone)]
pub struct SvgStyle {
    pub arc_color: &'static str,
    pub ray_color: &'static str,
    /// Stroke width as a fraction of the larger viewBox side.
    pub stroke: f64,
    /// Canvas width in pixels.
    pub width_px: u32,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            arc_color: "#1f4e9c",
            ray_color: "#555555",
            stroke: 0.006,
            width_px: 800,
        }
    }
}

fn flip(p: Point) -> Point {
    // adding 0.0 turns −0 into +0 so the text stays stable
    [p[0] + 0.0, -p[1] + 0.0]
}

fn path(out: &mut String, pts: &[Point], color: &str, stroke: f64) {
    let mut d = String::new();
    for (i, p) in pts.iter().enumerate() {
        let q = flip(*p);
        let _ = write!(d, "{}{:.6} {:.6}", if i == 0 { "M" } else { " L" }, q[0], q[1]);
    }
    let _ = writeln!(
        out,
        r#"  <path d="{d}" fill="none" stroke="{color}" stroke-width="{stroke:.6}" stroke-linejoin="round"/>"#
    );
}

/// Deterministic drawing: arcs first (upper, lower), then rays (left, right),
/// one path each. The viewBox is the bounding box of arcs and junctions
/// plus a 10% margin; rays run off the canvas.
pub fn emit_svg(snapshot: &NetworkSnapshot, style: &SvgStyle) -> Result<String> {
    if snapshot.upper_arc.len() < 2 || snapshot.lower_arc.len() < 2 {
        bail!("snapshot has no arc geometry");
    }
    let Some((lo, hi)) = snapshot.bounding_box() else {
        bail!("snapshot has no points");
    };
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if !(span > 0.0) || !span.is_finite() {
        bail!("degenerate bounding box");
    }
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let (mx, my) = (0.1 * w.max(1e-3 * span), 0.1 * h.max(1e-3 * span));
    let (vx, vy) = (lo[0] - mx, -hi[1] - my);
    let (vw, vh) = (w + 2.0 * mx, h + 2.0 * my);
    let height_px = (style.width_px as f64 * vh / vw).round().max(1.0) as u32;
    let stroke = style.stroke * vw.max(vh);
    let reach = 4.0 * (vw * vw + vh * vh).sqrt();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height_px}" viewBox="{vx:.6} {vy:.6} {vw:.6} {vh:.6}">"#,
        style.width_px
    );
    path(&mut out, &snapshot.upper_arc, style.arc_color, stroke);
    path(&mut out, &snapshot.lower_arc, style.arc_color, stroke);
    for ray in [&snapshot.left_ray, &snapshot.right_ray] {
        let end = add(ray.origin, scale(ray.direction, reach));
        path(&mut out, &[ray.origin, end], style.ray_color, stroke);
    }
    out.push_str("</svg>\n");
    Ok(out)
}
