//! A small SVG writer for band plots: axes, polylines and shaded polygons.

use std::fmt::Write as _;

use crate::curves::{BandKind, CurveBand, Point};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, p: Point) -> (f64, f64) {
        let sx = (p.x - self.x.0) / (self.x.1 - self.x.0);
        let sy = (p.y - self.y.0) / (self.y.1 - self.y.0);
        (MARGIN + sx * (WIDTH - 2.0 * MARGIN), HEIGHT - MARGIN - sy * (HEIGHT - 2.0 * MARGIN))
    }

    fn path(&self, pts: &[Point]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn finite(pts: Vec<Point>) -> Vec<Point> {
    pts.into_iter().filter(|p| p.x.is_finite() && p.y.is_finite()).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots bands of one kind and group set, one shading level per budget.
/// Larger budgets are drawn first and lighter, so narrower bands sit on top.
pub fn band_plot(title: &str, bands: &[CurveBand]) -> String {
    let mut bands: Vec<&CurveBand> = bands.iter().collect();
    bands.sort_by(|a, b| b.budget.total_cmp(&a.budget));
    let roc = bands.first().is_none_or(|b| b.kind.is_roc());

    let frame = if roc {
        Frame { x: (0.0, 1.0), y: (0.0, 1.0) }
    } else {
        let pts: Vec<Point> = bands
            .iter()
            .flat_map(|b| finite(b.lower_curve()).into_iter().chain(finite(b.upper_curve())))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let d = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
            (lo - d, hi + d)
        };
        Frame { x: pad(x0, x1), y: pad(y0.min(0.0), y1.max(0.0)) }
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title));

    let corners = [
        Point { x: frame.x.0, y: frame.y.0 },
        Point { x: frame.x.1, y: frame.y.0 },
        Point { x: frame.x.1, y: frame.y.1 },
        Point { x: frame.x.0, y: frame.y.1 },
        Point { x: frame.x.0, y: frame.y.0 },
    ];
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black"/>"#, frame.path(&corners));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let (xp, _) = frame.px(Point { x: xv, y: frame.y.0 });
        let (_, yp) = frame.px(Point { x: frame.x.0, y: yv });
        let _ = writeln!(s, r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#, HEIGHT - MARGIN + 16.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{yp:.2}" text-anchor="end">{yv:.2}</text>"#, MARGIN - 6.0);
    }
    let (x_label, y_label) = match bands.first().map(|b| b.kind) {
        Some(BandKind::Roc) => ("FPR", "TPR"),
        Some(BandKind::Xroc) => ("FPR (second group)", "TPR (first group)"),
        Some(BandKind::TprDisparity) => ("threshold", "TPR disparity"),
        Some(BandKind::TnrDisparity) => ("threshold", "TNR disparity"),
        None => ("", ""),
    };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{y_label}</text>"#,
        HEIGHT / 2.0
    );
    if roc {
        let diag = [Point { x: 0.0, y: 0.0 }, Point { x: 1.0, y: 1.0 }];
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#, frame.path(&diag));
    } else if frame.y.0 < 0.0 && frame.y.1 > 0.0 {
        let zero = [Point { x: frame.x.0, y: 0.0 }, Point { x: frame.x.1, y: 0.0 }];
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#, frame.path(&zero));
    }

    let n = bands.len().max(1) as f64;
    for (i, b) in bands.iter().enumerate() {
        let upper = finite(b.upper_curve());
        let mut lower = finite(b.lower_curve());
        let opacity = 0.15 + 0.5 * (i as f64 + 1.0) / n;
        lower.reverse();
        let ring: Vec<Point> = upper.iter().copied().chain(lower.iter().copied()).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="steelblue" fill-opacity="{opacity:.3}" stroke="none"><title>B = {}</title></polygon>"#,
            frame.path(&ring),
            b.budget
        );
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="navy" stroke-width="0.8"/>"#, frame.path(&upper));
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="navy" stroke-width="0.8"/>"#, frame.path(&lower));
        let ly = 40.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="steelblue" fill-opacity="{opacity:.3}"/><text x="{}" y="{}">B = {}</text>"#,
            WIDTH - 60.0,
            ly - 9.0,
            WIDTH - 46.0,
            ly,
            b.budget
        );
    }
    s.push_str("</svg>\n");
    s
}
