//! Scatter-plus-curve charts of stability against dominance.

use std::fmt::Write as _;

use crate::models::ModelParams;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const CURVE_SAMPLES: usize = 400;
const TICKS: usize = 5;

const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

pub struct Curve<'a> {
    pub label: String,
    pub params: &'a ModelParams<f64>,
    pub highlight: bool,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn padded(lo: f64, hi: f64, frac: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        let w = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - w, hi + w);
    }
    (lo - frac * span, hi + frac * span)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Renders the observed `(D, S)` points and one `<path>` per curve. The y
/// axis follows the data, and curve stretches leaving it are cut rather than
/// drawn off-chart.
pub fn render(title: &str, points: &[(f64, f64)], curves: &[Curve<'_>]) -> String {
    let fold = |f: fn(&(f64, f64)) -> f64| {
        points
            .iter()
            .map(f)
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x_lo, x_hi) = fold(|p| p.0);
    let (y_lo, y_hi) = fold(|p| p.1);
    let (x_lo, x_hi) = padded(x_lo, x_hi, 0.05);
    let (y_lo, y_hi) = padded(y_lo, y_hi, 0.25);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    let (bx0, by0, bx1, by1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{bx0:.2}" y1="{by0:.2}" x2="{bx1:.2}" y2="{by0:.2}"/><line x1="{bx0:.2}" y1="{by0:.2}" x2="{bx0:.2}" y2="{by1:.2}"/></g>"#
    );
    if y_lo < 0.0 && y_hi > 0.0 {
        let y0 = sy(0.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{bx0:.2}" y1="{y0:.2}" x2="{bx1:.2}" y2="{y0:.2}" stroke="#999999" stroke-dasharray="4 3"/>"##
        );
    }
    svg.push_str(r#"<g font-family="sans-serif" font-size="11">"#);
    svg.push('\n');
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            by0 + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            bx0 - 6.0,
            sy(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">community dominance D</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">stability S</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    svg.push_str("</g>\n");

    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for k in 0..=CURVE_SAMPLES {
            let x = x_lo + (x_hi - x_lo) * k as f64 / CURVE_SAMPLES as f64;
            let y = curve.params.value(x);
            if !y.is_finite() || y < y_lo || y > y_hi {
                pen_down = false;
                continue;
            }
            let cmd = if pen_down { 'L' } else { 'M' };
            if !d.is_empty() {
                d.push(' ');
            }
            let _ = write!(d, "{cmd}{:.2} {:.2}", sx(x), sy(y));
            pen_down = true;
        }
        let width = if curve.highlight { 2.5 } else { 1.2 };
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="{width}"><title>{}</title></path>"#,
            escape(&curve.label)
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="{width}"/><text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            escape(&curve.label)
        );
    }

    svg.push_str(r#"<g fill="black" fill-opacity="0.7">"#);
    svg.push('\n');
    for &(x, y) in points {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, sx(x), sy(y));
        }
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
