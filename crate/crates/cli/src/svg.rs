//! Minimal deterministic SVG plots. Numbers are printed with fixed precision
//! so repeated runs give identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Range padded by 5% on each side; degenerate ranges are widened to unit
/// length.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x,
            y,
            body: String::new(),
        }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        let pts: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", fmt(self.sx(x)), fmt(self.sy(y.clamp(self.y.0, self.y.1)))))
            .collect();
        if pts.len() < 2 {
            return;
        }
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
            pts.join(" ")
        );
    }

    pub fn segment(&mut self, a: (f64, f64), b: (f64, f64), color: &str, width: f64) {
        self.polyline(&[a, b], color, width);
    }

    /// Filled rectangle in data coordinates.
    pub fn rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, fill: &str, opacity: f64) {
        let (x0, x1) = (x0.max(self.x.0), x1.min(self.x.1));
        let (y0, y1) = (y0.max(self.y.0), y1.min(self.y.1));
        if x1 < x0 || y1 < y0 {
            return;
        }
        let (px, py) = (self.sx(x0), self.sy(y1));
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" fill-opacity="{opacity}"/>"#,
            fmt(px),
            fmt(py),
            fmt((self.sx(x1) - px).max(1.0)),
            fmt((self.sy(y0) - py).max(1.0)),
        );
    }

    pub fn point(&mut self, x: f64, y: f64, color: &str, label: Option<&str>) {
        let (px, py) = (self.sx(x), self.sy(y));
        let _ = writeln!(self.body, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, fmt(px), fmt(py));
        if let Some(l) = label {
            let _ = writeln!(
                self.body,
                r#"<text x="{}" y="{}" font-size="14" font-family="sans-serif">{}</text>"#,
                fmt(px + 6.0),
                fmt(py - 6.0),
                escape(l)
            );
        }
    }

    pub fn legend(&mut self, row: usize, color: &str, text: &str) {
        let y = MARGIN + 4.0 + 16.0 * row as f64;
        let x = W - MARGIN - 150.0;
        let _ = writeln!(self.body, r#"<rect x="{}" y="{}" width="12" height="8" fill="{color}"/>"#, fmt(x), fmt(y));
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="11" font-family="sans-serif">{}</text>"#,
            fmt(x + 16.0),
            fmt(y + 8.0),
            escape(text)
        );
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-size="15" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="middle">{}</text>"#,
                fmt(self.sx(xv)),
                fmt(y1 + 14.0),
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="end">{}</text>"#,
                fmt(x0 - 4.0),
                fmt(self.sy(yv) + 3.0),
                tick(yv)
            );
        }
        if self.y.0 < 0.0 && self.y.1 > 0.0 {
            let _ = writeln!(s, r##"<line x1="{x0}" x2="{x1}" y1="{0}" y2="{0}" stroke="#bbb"/>"##, fmt(self.sy(0.0)));
        }
        if self.x.0 < 0.0 && self.x.1 > 0.0 {
            let _ = writeln!(s, r##"<line x1="{0}" x2="{0}" y1="{y0}" y2="{y1}" stroke="#bbb"/>"##, fmt(self.sx(0.0)));
        }
        s.push_str(&self.body);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" font-size="12" font-family="sans-serif" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Grey ramp for heatmaps, `t` in `[0, 1]`.
pub fn shade(t: f64) -> String {
    let c = (255.0 * (1.0 - t.clamp(0.0, 1.0))).round() as u8;
    format!("rgb({c},{c},255)")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic_and_well_formed() {
        let build = || {
            let mut p = Plot::new("t", "x", "y", (0.0, 1.0), (-1.0, 1.0));
            p.polyline(&[(0.0, 0.0), (0.5, 0.9), (1.0, -0.2)], "black", 1.0);
            p.rect(0.2, 0.4, -1.0, 1.0, "orange", 0.3);
            p.point(0.5, 0.5, "red", Some("A<"));
            p.render()
        };
        let a = build();
        assert_eq!(a, build());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("A&lt;"));
    }

    #[test]
    fn degenerate_range_is_widened() {
        assert_eq!(padded_range([2.0, 2.0]), (1.5, 2.5));
        assert_eq!(padded_range([f64::NAN]), (0.0, 1.0));
    }
}
