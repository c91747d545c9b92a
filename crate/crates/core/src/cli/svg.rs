//! Static SVG rendering of a 2d clustering.

use std::fmt::Write;

use crate::assignment::AssignmentMatrix;
use crate::matrix::DenseMatrix;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

/// Maps data coordinates into the viewport with one scale for both axes,
/// so angles between partition rays are preserved. The y axis points up.
struct Frame {
    min: (f64, f64),
    scale: f64,
    offset: (f64, f64),
}

impl Frame {
    fn fit(points: &[(f64, f64)]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &(x, y) in points {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(f64::MIN_POSITIVE);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        let offset = (
            MARGIN + 0.5 * (SIZE - 2.0 * MARGIN - (hi.0 - lo.0) * scale),
            MARGIN + 0.5 * (SIZE - 2.0 * MARGIN - (hi.1 - lo.1) * scale),
        );
        Self { min: lo, scale, offset }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (self.offset.0 + (x - self.min.0) * self.scale, SIZE - self.offset.1 - (y - self.min.1) * self.scale)
    }
}

fn star(out: &mut String, (cx, cy): (f64, f64), radius: f64, fill: &str) {
    let pts: Vec<String> = (0..10)
        .map(|i| {
            let r = if i % 2 == 0 { radius } else { radius * 0.45 };
            let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    let _ = writeln!(out, r#"  <polygon points="{}" fill="{fill}" stroke="black" stroke-width="1"/>"#, pts.join(" "));
}

/// Points colored by cluster, a star at each cluster mean, a cross at the
/// global mean, and a ray from the global mean pointing away from each
/// cluster mean (the extension of the segment mean-to-cluster-mean).
pub fn render(points: &DenseMatrix, assignment: &AssignmentMatrix) -> String {
    let n = points.rows();
    let k = assignment.k();
    let pts: Vec<(f64, f64)> = (0..n).map(|i| (points[(i, 0)], points[(i, 1)])).collect();
    let mean = {
        let m = points.column_means();
        (m[0], m[1])
    };
    let cluster_means: Vec<(f64, f64)> = (0..k)
        .map(|c| {
            let members = assignment.members(c);
            let s = members.iter().fold((0.0, 0.0), |s, &i| (s.0 + pts[i].0, s.1 + pts[i].1));
            let len = members.len().max(1) as f64;
            (s.0 / len, s.1 / len)
        })
        .collect();
    let frame = Frame::fit(&pts);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"  <rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);

    let g = frame.map(mean);
    for &cm in &cluster_means {
        let (dx, dy) = (mean.0 - cm.0, mean.1 - cm.1);
        let norm = dx.hypot(dy);
        if norm == 0.0 {
            continue;
        }
        // Long enough to leave the viewport from anywhere inside it.
        let reach = 2.0 * SIZE / frame.scale;
        let end = frame.map((mean.0 + dx / norm * reach, mean.1 + dy / norm * reach));
        let _ = writeln!(
            out,
            r##"  <line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444" stroke-width="1.5" stroke-dasharray="6,4"/>"##,
            g.0, g.1, end.0, end.1
        );
    }
    for (i, &p) in pts.iter().enumerate() {
        let (x, y) = frame.map(p);
        let color = PALETTE[assignment.label(i) % PALETTE.len()];
        let _ = writeln!(out, r#"  <circle cx="{x:.2}" cy="{y:.2}" r="5" fill="{color}"/>"#);
    }
    for (c, &cm) in cluster_means.iter().enumerate() {
        star(&mut out, frame.map(cm), 12.0, PALETTE[c % PALETTE.len()]);
    }
    let _ = writeln!(
        out,
        r#"  <path d="M {:.2} {:.2} l 16 16 m 0 -16 l -16 16" stroke="black" stroke-width="3"/>"#,
        g.0 - 8.0,
        g.1 - 8.0
    );
    out.push_str("</svg>\n");
    out
}
