//! Minimal standalone SVG line chart.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Affine map from data to pixel coordinates:
/// `px = x_offset + x_scale·x`, `py = y_offset + y_scale·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub x_offset: f64,
    pub x_scale: f64,
    pub y_offset: f64,
    pub y_scale: f64,
}

impl Transform {
    fn fit(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let (x0, x1) = widen(x_range);
        let (y0, y1) = widen(y_range);
        let x_scale = (WIDTH - LEFT - RIGHT) / (x1 - x0);
        let y_scale = -(HEIGHT - TOP - BOTTOM) / (y1 - y0);
        Transform {
            x_offset: LEFT - x_scale * x0,
            x_scale,
            y_offset: TOP - y_scale * y1,
            y_scale,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x_offset + self.x_scale * x, self.y_offset + self.y_scale * y)
    }

    pub fn invert(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.x_offset) / self.x_scale, (py - self.y_offset) / self.y_scale)
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Line chart of `(xs, ys)` with an optional horizontal reference rule.
/// Non-finite points are skipped. Returns the document and the transform
/// used, which is also written into the header comment.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    rule: Option<f64>,
) -> (String, Transform) {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let mut x_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y_range = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x_range = (x_range.0.min(x), x_range.1.max(x));
        y_range = (y_range.0.min(y), y_range.1.max(y));
    }
    if let Some(r) = rule {
        y_range = (y_range.0.min(r), y_range.1.max(r));
    }
    if pts.is_empty() {
        x_range = (0.0, 1.0);
        if !y_range.0.is_finite() {
            y_range = (0.0, 1.0);
        }
    }
    let tf = Transform::fit(x_range, y_range);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        "<!-- affine map: px = {} + {} * x ; py = {} + {} * y -->",
        tf.x_offset, tf.x_scale, tf.y_offset, tf.y_scale
    );
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let (ax0, ay0) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{ax0}" y1="{ay0}" x2="{}" y2="{ay0}"/><line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{TOP}"/></g>"#,
        WIDTH - RIGHT
    );
    let (xl, xh) = (tf.invert(LEFT, 0.0).0, tf.invert(WIDTH - RIGHT, 0.0).0);
    let (yl, yh) = (tf.invert(0.0, HEIGHT - BOTTOM).1, tf.invert(0.0, TOP).1);
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    for x in ticks(xl, xh, 5) {
        let (px, _) = tf.apply(x, 0.0);
        let _ = writeln!(
            out,
            r#"<line x1="{px}" y1="{ay0}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            ay0 + 5.0,
            ay0 + 18.0,
            tick_label(x)
        );
    }
    for y in ticks(yl, yh, 5) {
        let (_, py) = tf.apply(0.0, y);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py}" x2="{ax0}" y2="{py}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            ax0 - 5.0,
            ax0 - 8.0,
            py + 4.0,
            tick_label(y)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label)
    );

    if let Some(r) = rule {
        let (_, py) = tf.apply(0.0, r);
        let _ = writeln!(
            out,
            r##"<line class="limit" x1="{LEFT}" y1="{py}" x2="{}" y2="{py}" stroke="#c0392b" stroke-dasharray="6 4"/>"##,
            WIDTH - RIGHT
        );
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (px, py) = tf.apply(x, y);
            format!("{px},{py}")
        })
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline class="data" fill="none" stroke="#1f4e79" stroke-width="2" points="{}"/>"##,
        coords.join(" ")
    );
    let _ = writeln!(out, "</svg>");
    (out, tf)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}
