//! Minimal SVG charts: a labeled scatter and a two-series line chart.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub const REAL_COLOR: &str = "blue";
pub const PREDICTED_COLOR: &str = "red";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from a data range onto a pixel range.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if lo > hi {
            (lo, hi) = (0.0, 1.0);
        } else if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0)
    }
}

struct Canvas {
    body: String,
    x: Axis,
    y: Axis,
}

impl Canvas {
    fn new(title: &str, x_label: &str, y_label: &str, x: Axis, y: Axis) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            body,
            r#"<g stroke="black" stroke-width="1">
<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>
<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>
</g>"#
        );
        body.push_str("<g fill=\"black\">\n");
        for t in x.ticks() {
            let px = x.map(t);
            let _ = writeln!(
                body,
                r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 4.0,
                y0 + 18.0,
                tick_label(t)
            );
        }
        for t in y.ticks() {
            let py = y.map(t);
            let _ = writeln!(
                body,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 7.0,
                py + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>
<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>
</g>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(x_label),
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        Self { body, x, y }
    }

    fn legend(&mut self, entries: &[(String, &str)], line: bool) {
        let x = WIDTH - RIGHT + 15.0;
        self.body.push_str("<g class=\"legend\">\n");
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 20.0 * i as f64;
            if line {
                let _ = writeln!(
                    self.body,
                    r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
                    x + 20.0
                );
            } else {
                let _ = writeln!(
                    self.body,
                    r#"<circle cx="{}" cy="{y}" r="4" fill="{color}"/>"#,
                    x + 10.0
                );
            }
            let _ = writeln!(
                self.body,
                r#"<text x="{}" y="{}">{}</text>"#,
                x + 26.0,
                y + 4.0,
                escape(label)
            );
        }
        self.body.push_str("</g>\n");
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Scatter of 2-D points colored by `labels` (values below `k`).
pub fn scatter(title: &str, points: &[[f64; 2]], labels: &[usize], k: usize) -> String {
    assert_eq!(points.len(), labels.len());
    let x = Axis::new(points.iter().map(|p| p[0]), LEFT, WIDTH - RIGHT);
    let y = Axis::new(points.iter().map(|p| p[1]), HEIGHT - BOTTOM, TOP);
    let mut c = Canvas::new(title, "LD1", "LD2", x, y);
    for j in 0..k {
        let color = PALETTE[j % PALETTE.len()];
        let _ = writeln!(
            c.body,
            r#"<g class="cluster" fill="{color}" fill-opacity="0.7">"#
        );
        for (p, _) in points.iter().zip(labels).filter(|(_, &l)| l == j) {
            let _ = writeln!(
                c.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#,
                c.x.map(p[0]),
                c.y.map(p[1])
            );
        }
        c.body.push_str("</g>\n");
    }
    let entries: Vec<(String, &str)> = (0..k)
        .map(|j| (format!("Cluster {}", j + 1), PALETTE[j % PALETTE.len()]))
        .collect();
    c.legend(&entries, false);
    c.finish()
}

/// Real (blue) and predicted (red) series against sample position.
pub fn fit_chart(title: &str, y_label: &str, real: &[f64], predicted: &[f64]) -> String {
    assert_eq!(real.len(), predicted.len());
    let n = real.len();
    let x = Axis::new(
        [0.0, n.saturating_sub(1) as f64].into_iter(),
        LEFT,
        WIDTH - RIGHT,
    );
    let y = Axis::new(real.iter().chain(predicted).copied(), HEIGHT - BOTTOM, TOP);
    let mut c = Canvas::new(title, "Sample", y_label, x, y);
    for (series, color, name) in [
        (real, REAL_COLOR, "real"),
        (predicted, PREDICTED_COLOR, "predicted"),
    ] {
        let mut pts = String::new();
        for (i, v) in series.iter().enumerate() {
            if !pts.is_empty() {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", c.x.map(i as f64), c.y.map(*v));
        }
        let _ = writeln!(
            c.body,
            r#"<polyline class="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>"#
        );
    }
    c.legend(
        &[
            ("Real".into(), REAL_COLOR),
            ("Predicted".into(), PREDICTED_COLOR),
        ],
        true,
    );
    c.finish()
}
