//! Minimal deterministic SVG 1.1 rendering of phase portraits and branch
//! diagrams.

use std::fmt::Write as _;

use crate::error::{IslmError, Result};
use crate::isocline::{IsoclineCurve, Stability};
use crate::ode::Vec2;

#[derive(Clone, Debug)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    /// CSS class, e.g. `arc-stable`, `arc-unstable`, `trajectory`.
    pub class: String,
    /// Number of direction arrows drawn along the line.
    pub arrows: usize,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>, class: impl Into<String>) -> Self {
        Self { points, class: class.into(), arrows: 0 }
    }

    pub fn with_arrows(mut self, n: usize) -> Self {
        self.arrows = n;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Dot {
    pub at: Vec2,
    pub class: String,
    pub label: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Polyline>,
    pub dots: Vec<Dot>,
}

impl Scene {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    /// Adds an isocline split into one polyline per arc, classed by
    /// stability when known.
    pub fn add_isocline(&mut self, c: &IsoclineCurve) {
        let name = c.which.to_string().to_lowercase();
        if c.arcs.is_empty() {
            self.lines.push(Polyline::new(c.points.iter().map(|p| p.as_array()).collect(), format!("curve {name}")));
            return;
        }
        for a in &c.arcs {
            let class = match a.stability {
                Some(Stability::Stable) => "arc-stable",
                Some(Stability::Unstable) => "arc-unstable",
                None => "arc",
            };
            let pts = c.points[a.start..=a.end].iter().map(|p| p.as_array()).collect();
            self.lines.push(Polyline::new(pts, format!("{class} {name}")));
        }
    }

    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let pts = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter().copied())
            .chain(self.dots.iter().map(|d| d.at))
            .filter(|p| p[0].is_finite() && p[1].is_finite());
        let mut b: Option<(f64, f64, f64, f64)> = None;
        for p in pts {
            b = Some(match b {
                None => (p[0], p[0], p[1], p[1]),
                Some((x0, x1, y0, y1)) => (x0.min(p[0]), x1.max(p[0]), y0.min(p[1]), y1.max(p[1])),
            });
        }
        b
    }
}

#[derive(Clone, Debug)]
pub struct Style {
    pub width: u32,
    pub height: u32,
    pub stroke_width: f64,
    pub margin: f64,
}

impl Default for Style {
    fn default() -> Self {
        Self { width: 800, height: 600, stroke_width: 1.5, margin: 0.05 }
    }
}

const CSS: &str = "\
.arc-stable{stroke:#1f5fbf;fill:none}\
.arc-unstable{stroke:#c0392b;fill:none;stroke-dasharray:6 4}\
.arc,.curve{stroke:#555;fill:none}\
.trajectory{stroke:#222;fill:none}\
.jump{stroke:#e67e22;fill:none}\
.orbit{stroke:#27ae60;fill:none;stroke-dasharray:2 3}\
.up{stroke:#8e44ad;fill:none}\
.down{stroke:#16a085;fill:none}\
.arrow{fill:#222;stroke:none}\
.eq{fill:#000}\
.fold{fill:#c0392b}\
text{font-family:sans-serif;font-size:12px}";

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" { "0.000000".to_string() } else { s }
}

/// Renders `scene`. Data coordinates map into a `width x height` canvas
/// covering the data bounds plus a relative `margin`, with the vertical
/// axis pointing up.
pub fn emit_svg(scene: &Scene, style: &Style) -> Result<Vec<u8>> {
    if scene.lines.iter().all(|l| l.points.is_empty()) && scene.dots.is_empty() {
        return Err(IslmError::EmptyGeometry);
    }
    let (x0, x1, y0, y1) = scene.bounds().ok_or(IslmError::EmptyGeometry)?;
    let pad = |lo: f64, hi: f64| {
        let w = hi - lo;
        let m = if w > 0.0 { style.margin * w } else { style.margin * lo.abs().max(1.0) };
        (lo - m, hi + m)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let (w, h) = (style.width as f64, style.height as f64);
    let px = |p: Vec2| -> (f64, f64) { ((p[0] - x0) / (x1 - x0) * w, (y1 - p[1]) / (y1 - y0) * h) };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" data-bounds="{} {} {} {}">"#,
        style.width, style.height, style.width, style.height,
        num(x0), num(x1), num(y0), num(y1)
    );
    let _ = writeln!(s, "<style>{CSS}</style>");
    if !scene.title.is_empty() {
        let _ = writeln!(s, "<title>{}</title>", escape(&scene.title));
    }
    for l in &scene.lines {
        if l.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = l
            .points
            .iter()
            .map(|&p| {
                let (a, b) = px(p);
                format!("{},{}", num(a), num(b))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{}" stroke-width="{}" vector-effect="non-scaling-stroke" points="{}"/>"#,
            escape(&l.class),
            num(style.stroke_width),
            pts.join(" ")
        );
        if l.arrows > 0 && l.points.len() > 2 {
            let n = l.points.len();
            for k in 1..=l.arrows {
                let i = (k * (n - 1) / (l.arrows + 1)).clamp(1, n - 2);
                let (ax, ay) = px(l.points[i]);
                let (bx, by) = px(l.points[i + 1]);
                let (dx, dy) = (bx - ax, by - ay);
                let len = dx.hypot(dy);
                if len == 0.0 {
                    continue;
                }
                let (ux, uy) = (dx / len, dy / len);
                let size = 7.0;
                let tip = (ax + ux * size, ay + uy * size);
                let left = (ax - uy * size * 0.5, ay + ux * size * 0.5);
                let right = (ax + uy * size * 0.5, ay - ux * size * 0.5);
                let _ = writeln!(
                    s,
                    r#"<path class="arrow" d="M{},{} L{},{} L{},{} Z"/>"#,
                    num(tip.0), num(tip.1), num(left.0), num(left.1), num(right.0), num(right.1)
                );
            }
        }
    }
    for d in &scene.dots {
        let (a, b) = px(d.at);
        let _ = writeln!(s, r#"<circle class="{}" cx="{}" cy="{}" r="3"/>"#, escape(&d.class), num(a), num(b));
        if let Some(t) = &d.label {
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, num(a + 5.0), num(b - 5.0), escape(t));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - 4.0, h - 4.0, escape(&scene.x_label));
    let _ = writeln!(s, r#"<text x="4" y="14">{}</text>"#, escape(&scene.y_label));
    s.push_str("</svg>\n");
    Ok(s.into_bytes())
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
