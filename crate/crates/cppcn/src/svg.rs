//! Minimal SVG scatter plots.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let m = 0.05 * (hi - lo);
    (lo - m, hi + m)
}

/// Scatter of `(x, y)` with an optional `y = slope·x + intercept` line.
pub fn scatter(points: &[(f64, f64)], fit: Option<(f64, f64)>, title: &str, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = span(points.iter().map(|p| p.0));
    let (y0, y1) = span(points.iter().map(|p| p.1));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 12.0, esc(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(y_label)
    )
    .unwrap();
    for (v, anchor, x, y) in [
        (x0, "start", sx(x0), H - PAD + 14.0),
        (x1, "end", sx(x1), H - PAD + 14.0),
    ] {
        writeln!(s, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="10">{v:.4}</text>"#).unwrap();
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1) + 8.0)] {
        writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="10">{v:.4}</text>"#, PAD - 4.0).unwrap();
    }
    if let Some((slope, intercept)) = fit {
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="1.5"/>"#,
            sx(x0),
            sy(slope * x0 + intercept),
            sx(x1),
            sy(slope * x1 + intercept)
        )
        .unwrap();
    }
    for &(x, y) in points {
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
