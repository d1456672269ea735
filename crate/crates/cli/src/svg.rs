//! Minimal SVG 1.1 line chart: axes, a zero line and one polyline per series.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn line_chart(title: &str, series: &[(String, Vec<f64>)]) -> String {
    let len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|x| x.is_finite())
        .fold((0.0f64, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |k: usize| MARGIN + plot_w * k as f64 / (len - 1) as f64;
    let sy = |y: f64| MARGIN + plot_h * (hi - y) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let zero = sy(0.0);
    let _ = writeln!(
        s,
        r##"<line x1="{x0}" y1="{zero:.2}" x2="{x1}" y2="{zero:.2}" stroke="#999" stroke-dasharray="4 4"/>"##
    );
    for (y, anchor) in [(hi, y0 + 4.0), (lo, y1)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{anchor}" font-family="sans-serif" font-size="11" text-anchor="end">{y:.3}</text>"#,
            x0 - 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">k = {}</text>"#,
        y1 + 18.0,
        len - 1
    );

    for (i, (name, values)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| format!("{:.2},{:.2}", sx(k), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = y0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            x1 + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
