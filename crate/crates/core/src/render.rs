//! SVG frames of a network, one per trajectory sample.

use std::fmt::Write as _;

use crate::anisotropy::Vec2;
use crate::network::{EdgeEnd, Network};

/// Axis-aligned view box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBox {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl ViewBox {
    /// Bounding box of the vertices scaled by 1.2 about its center. A network
    /// with a single vertex gets a box of half-width 1.
    pub fn around(net: &Network) -> ViewBox {
        let (lo, hi) = if net.vertices.is_empty() {
            (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0))
        } else {
            net.bbox()
        };
        let c = (lo + hi) * 0.5;
        let mut half = Vec2::new((hi.x - lo.x) * 0.6, (hi.y - lo.y) * 0.6);
        let floor = 0.1 * half.x.max(half.y);
        let floor = if floor > 0.0 { floor } else { 1.0 };
        half = Vec2::new(half.x.max(floor), half.y.max(floor));
        ViewBox { lo: c - half, hi: c + half }
    }

    pub fn width(&self) -> f64 {
        self.hi.x - self.lo.x
    }

    pub fn height(&self) -> f64 {
        self.hi.y - self.lo.y
    }

    /// Clips p + s·d, s ∈ [s0, s1], to the box (Liang–Barsky).
    fn clip(&self, p: Vec2, d: Vec2, mut s0: f64, mut s1: f64) -> Option<(Vec2, Vec2)> {
        for (q, r) in [
            (-d.x, p.x - self.lo.x),
            (d.x, self.hi.x - p.x),
            (-d.y, p.y - self.lo.y),
            (d.y, self.hi.y - p.y),
        ] {
            if q == 0.0 {
                if r < 0.0 {
                    return None;
                }
            } else {
                let s = r / q;
                if q < 0.0 {
                    s0 = s0.max(s);
                } else {
                    s1 = s1.min(s);
                }
            }
        }
        (s0 <= s1).then(|| (p + d * s0, p + d * s1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    /// Output width in pixels; the height follows the view box aspect.
    pub width_px: f64,
    /// Stroke width of a multiplicity-one edge, in pixels.
    pub stroke_px: f64,
    pub label: bool,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { width_px: 600.0, stroke_px: 2.0, label: true }
    }
}

/// Renders `net` into `view`; the y axis points up.
pub fn svg_frame(net: &Network, view: &ViewBox, style: &SvgStyle, caption: Option<&str>) -> String {
    let scale = style.width_px / view.width();
    let height_px = view.height() * scale;
    let to_px = |p: Vec2| ((p.x - view.lo.x) * scale, (view.hi.y - p.y) * scale);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        style.width_px, height_px, style.width_px, height_px
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for edge in &net.edges {
        let p = net.vertices[edge.from].pos;
        let clipped = match edge.end {
            EdgeEnd::Vertex(to) => view.clip(p, net.vertices[to].pos - p, 0.0, 1.0),
            EdgeEnd::Direction(dir) => view.clip(p, dir, 0.0, f64::INFINITY),
        };
        let Some((a, b)) = clipped else { continue };
        let ((x1, y1), (x2, y2)) = (to_px(a), to_px(b));
        let dash = if edge.is_halfline() { r#" stroke-dasharray="6 3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="black" stroke-width="{:.3}"{dash}><title>{}</title></line>"#,
            style.stroke_px * edge.multiplicity.max(1) as f64,
            edge.id
        );
    }
    for v in &net.vertices {
        let (x, y) = to_px(v.pos);
        let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="black"/>"#, style.stroke_px * 1.2);
    }
    if let (true, Some(text)) = (style.label, caption) {
        let _ = writeln!(out, r#"<text x="8" y="18" font-family="monospace" font-size="14">{text}</text>"#);
    }
    out.push_str("</svg>\n");
    out
}
