//! Minimal SVG and PGM writers. Inputs are plain data read back from the
//! CSV outputs; nothing here evaluates a model.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (px, py) = (l + f * (r - l), b - f * (b - t));
        let _ = writeln!(
            out,
            r#"<text x="{px}" y="{}" text-anchor="middle">{:.3}</text>"#,
            b + 16.0,
            x0 + f * (x1 - x0)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
            l - 4.0,
            py + 4.0,
            y0 + f * (y1 - y0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

/// Line chart with one polyline and legend entry per series.
pub fn line_chart(series: &[Series], title: &str, xlabel: &str, ylabel: &str) -> String {
    let xr = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, xr, yr, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="4" fill="{color}"/>"#,
            WIDTH - MARGIN - 110.0,
            ly - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}">{}</text>"#,
            WIDTH - MARGIN - 94.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale heatmap of `grid[[row, col]]`; row 0 is drawn at the bottom.
/// Values are mapped linearly from `[lo, hi]` to white..black.
pub fn heatmap(
    grid: ArrayView2<f64>,
    x_range: (f64, f64),
    y_range: (f64, f64),
    (lo, hi): (f64, f64),
    title: &str,
) -> String {
    let (nr, nc) = grid.dim();
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_range, y_range, "x", "y");
    if nr == 0 || nc == 0 {
        out.push_str("</svg>\n");
        return out;
    }
    let cw = (WIDTH - 2.0 * MARGIN) / nc as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / nr as f64;
    for ((r, c), &v) in grid.indexed_iter() {
        let f = if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let g = (255.0 * (1.0 - f)).round() as u8;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({g},{g},{g})"/>"#,
            MARGIN + c as f64 * cw,
            HEIGHT - MARGIN - (r + 1) as f64 * ch,
            cw + 0.05,
            ch + 0.05
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Binary PGM (P5) from pixels in `[0, 1]`, row-major.
pub fn write_pgm(path: &Path, pixels: &[f64], rows: usize, cols: usize) -> Result<()> {
    if pixels.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: pixels.len(),
        });
    }
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    bytes.extend(
        pixels
            .iter()
            .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
