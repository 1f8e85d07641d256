//! Static SVG: three panels (risk, concentration, Sharpe ratio) against `R`.

use std::fmt::Write;

pub struct Series {
    pub points: Vec<(f64, f64)>,
}

pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub err: Option<f64>,
}

pub struct Panel {
    pub title: String,
    pub curve: Series,
    pub markers: Vec<Marker>,
    pub reference: Option<f64>,
}

const W: f64 = 360.0;
const H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const CURVE: &str = "#e07b00";
const POINTS: &str = "#1f5fbf";

fn bounds(panel: &Panel) -> (f64, f64, f64, f64) {
    let xs = panel.curve.points.iter().map(|p| p.0).chain(panel.markers.iter().map(|m| m.x));
    let ys = panel
        .curve
        .points
        .iter()
        .map(|p| p.1)
        .chain(panel.markers.iter().flat_map(|m| {
            let e = m.err.unwrap_or(0.0);
            [m.y - e, m.y + e]
        }))
        .chain(panel.reference);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) =
        ys.filter(|y| y.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

fn draw_panel(out: &mut String, panel: &Panel, offset: f64) {
    let (x0, x1, y0, y1) = bounds(panel);
    let sx = |x: f64| offset + MARGIN + (x - x0) / (x1 - x0) * (W - 1.5 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 1.5 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        offset + MARGIN,
        0.5 * MARGIN,
        W - 1.5 * MARGIN,
        H - 1.5 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="18" font-size="13" text-anchor="middle">{}</text>"#,
        offset + W / 2.0,
        panel.title
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="middle">{fx:.3}</text>"#,
            sx(fx),
            H - MARGIN + 14.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="end">{fy:.3}</text>"#,
            offset + MARGIN - 4.0,
            sy(fy) + 3.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">R</text>"#,
        offset + W / 2.0,
        H - 12.0
    );
    if let Some(r) = panel.reference {
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="5,4"/>"#,
            sx(x0),
            sy(r),
            sx(x1),
            sy(r)
        );
    }
    let path: Vec<String> = panel.curve.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{CURVE}" stroke-width="2" points="{}"/>"#, path.join(" "));
    for m in &panel.markers {
        if let Some(e) = m.err {
            let _ = writeln!(
                out,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{POINTS}"/>"#,
                sx(m.x),
                sy(m.y - e),
                sy(m.y + e)
            );
        }
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{POINTS}"/>"#, sx(m.x), sy(m.y));
    }
}

pub fn render(panels: &[Panel]) -> String {
    let mut out = String::new();
    let width = W * panels.len() as f64;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" viewBox="0 0 {width} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
