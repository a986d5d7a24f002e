//! Dependency-free SVG charts on a fixed 1200x600 canvas.
//!
//! Element classes are stable so tests can count them: `bar` (ACF bars), `band`
//! (confidence band lines), `pvalues` (Ljung-Box polyline), `threshold`
//! (significance line), `r1` (rolling polylines), `zero` (zero line).

use std::fmt::Write;

use marketacf_core::text::format_timestamp;

const WIDTH: f64 = 1200.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 70.0;

const COLOR_BAR: &str = "#1f77b4";
const COLOR_BAND: &str = "#d62728";
const COLOR_AXIS: &str = "#333333";
const COLOR_GRID: &str = "#e5e5e5";

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from data space to the plot area.
struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::MIN_POSITIVE);
        LEFT + (v - self.x_min) / span * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        HEIGHT - BOTTOM - (v - self.y_min) / span * (HEIGHT - TOP - BOTTOM)
    }
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(body, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="35" text-anchor="middle" font-size="20">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 20.0,
            escape(x_label)
        );
        let _ = writeln!(
            body,
            r#"<text x="25" y="{:.2}" text-anchor="middle" font-size="14" transform="rotate(-90 25 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
        Self { body }
    }

    fn axes(&mut self, frame: &Frame, y_ticks: &[f64]) {
        for &t in y_ticks {
            let y = frame.y(t);
            let _ = writeln!(
                self.body,
                r#"<line class="grid" x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{COLOR_GRID}"/>"#,
                WIDTH - RIGHT
            );
            let _ = writeln!(
                self.body,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="12">{}</text>"#,
                LEFT - 8.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            self.body,
            r#"<rect class="axis" x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{COLOR_AXIS}"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let base = HEIGHT - BOTTOM;
        let _ = writeln!(
            self.body,
            r#"<line class="tick" x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="{COLOR_AXIS}"/>"#,
            base + 5.0
        );
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            base + 20.0,
            escape(label)
        );
    }

    fn hline(&mut self, class: &str, frame: &Frame, value: f64, color: &str, dashed: bool) {
        let y = frame.y(value);
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            WIDTH - RIGHT
        );
    }

    fn polyline(&mut self, class: &str, points: &[(f64, f64)], color: &str) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Evenly spaced ticks from `-limit` to `limit`.
fn symmetric_ticks(limit: f64) -> Vec<f64> {
    (-4..=4).map(|i| limit * f64::from(i) / 4.0).collect()
}

/// Lag-`k` bars with the `±band` lines.
pub fn acf_chart(title: &str, coefficients: &[f64], band: f64) -> String {
    let peak = coefficients.iter().fold(band, |m, c| m.max(c.abs()));
    let limit = (peak * 1.15).clamp(0.05, 1.0);
    let lags = coefficients.len();
    let frame = Frame { x_min: 0.5, x_max: lags as f64 + 0.5, y_min: -limit, y_max: limit };
    let mut canvas = Canvas::new(title, "lag", "autocorrelation");
    canvas.axes(&frame, &symmetric_ticks(limit));
    let width = (frame.x(1.0) - frame.x(0.0)) * 0.6;
    let zero = frame.y(0.0);
    for (i, c) in coefficients.iter().enumerate() {
        let lag = i + 1;
        let x = frame.x(lag as f64) - width / 2.0;
        let y = frame.y(*c);
        let _ = writeln!(
            canvas.body,
            r#"<rect class="bar" x="{x:.2}" y="{:.2}" width="{width:.2}" height="{:.2}" fill="{COLOR_BAR}"/>"#,
            y.min(zero),
            (y - zero).abs()
        );
        if lag == 1 || lag % 5 == 0 {
            canvas.x_tick(frame.x(lag as f64), &lag.to_string());
        }
    }
    canvas.hline("zero", &frame, 0.0, COLOR_AXIS, false);
    canvas.hline("band", &frame, band, COLOR_BAND, true);
    canvas.hline("band", &frame, -band, COLOR_BAND, true);
    canvas.finish()
}

/// P-value polyline over lags `1..`, with the significance threshold.
pub fn ljung_box_chart(title: &str, p_values: &[f64], alpha: f64) -> String {
    let lags = p_values.len();
    let frame = Frame { x_min: 1.0, x_max: (lags as f64).max(2.0), y_min: 0.0, y_max: 1.0 };
    let mut canvas = Canvas::new(title, "lag", "p-value");
    canvas.axes(&frame, &[0.0, 0.25, 0.5, 0.75, 1.0]);
    for lag in 1..=lags {
        if lag == 1 || lag % 5 == 0 {
            canvas.x_tick(frame.x(lag as f64), &lag.to_string());
        }
    }
    canvas.hline("threshold", &frame, alpha, COLOR_BAND, true);
    let points: Vec<(f64, f64)> =
        p_values.iter().enumerate().map(|(i, p)| (frame.x((i + 1) as f64), frame.y(p.clamp(0.0, 1.0)))).collect();
    canvas.polyline("pvalues", &points, COLOR_BAR);
    canvas.finish()
}

/// Rolling lag-1 autocorrelation against window end time; gaps split the line.
pub fn rolling_chart(title: &str, window_ends: &[i64], r1: &[Option<f64>]) -> String {
    let first = window_ends.first().copied().unwrap_or(0) as f64;
    let last = window_ends.last().copied().unwrap_or(1) as f64;
    let peak = r1.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = (peak * 1.15).clamp(0.05, 1.0);
    let frame =
        Frame { x_min: first, x_max: if last > first { last } else { first + 1.0 }, y_min: -limit, y_max: limit };
    let mut canvas = Canvas::new(title, "window end (UTC)", "lag-1 autocorrelation");
    canvas.axes(&frame, &symmetric_ticks(limit));
    if !window_ends.is_empty() {
        for i in 0..=5 {
            let t = first + (frame.x_max - first) * f64::from(i) / 5.0;
            let label = format_timestamp(t as i64);
            canvas.x_tick(frame.x(t), &label[..10.min(label.len())]);
        }
    }
    canvas.hline("zero", &frame, 0.0, COLOR_AXIS, false);
    let mut segment = Vec::new();
    for (ts, v) in window_ends.iter().zip(r1) {
        match v {
            Some(v) => segment.push((frame.x(*ts as f64), frame.y(*v))),
            None => {
                canvas.polyline("r1", &segment, COLOR_BAR);
                segment.clear();
            }
        }
    }
    canvas.polyline("r1", &segment, COLOR_BAR);
    canvas.finish()
}
