//! Static SVG renderings of effects, weights and correlations.

use std::fmt::Write as _;

use crate::explain::{CorrelationMatrix, EffectsDistribution, LinearMap};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Diverging blue-white-red color for `v` in `[-limit, limit]`.
fn diverging(v: f64, limit: f64) -> String {
    let t = if limit > 0.0 { (v / limit).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |a: f64| (255.0 * (1.0 - a.abs())).round() as u8;
    if t >= 0.0 {
        format!("rgb(255,{},{})", fade(t), fade(t))
    } else {
        format!("rgb({},{},255)", fade(t), fade(t))
    }
}

/// Annotated heat map of a row-major `rows x cols` matrix.
pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[f64]) -> String {
    let (cell, left, top) = (56.0, 150.0, 110.0);
    let width = left + cell * cols.len() as f64 + 20.0;
    let height = top + cell * rows.len() as f64 + 20.0;
    let limit = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    for (c, name) in cols.iter().enumerate() {
        let x = left + cell * (c as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" transform="rotate(-45 {x} {})">{}</text>"#, top - 8.0, top - 8.0, escape(name));
    }
    for (r, name) in rows.iter().enumerate() {
        let y = top + cell * r as f64;
        let _ = writeln!(s, r#"<text x="10" y="{}">{}</text>"#, y + cell / 2.0 + 4.0, escape(name));
        for c in 0..cols.len() {
            let v = values[r * cols.len() + c];
            let x = left + cell * c as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="white"/><text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#,
                diverging(v, limit),
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn weights_svg(map: &LinearMap) -> String {
    let values: Vec<f64> = map.weights.iter().flatten().copied().collect();
    heatmap("Linear layer weights", &map.features, &map.targets, &values)
}

pub fn correlation_svg(m: &CorrelationMatrix) -> String {
    heatmap("Mid-level / emotion correlation", &m.features, &m.targets, &m.values)
}

/// One boxplot panel per emotion, one box per feature.
pub fn effects_svg(d: &EffectsDistribution) -> String {
    let (pw, ph, pad) = (260.0, 220.0, 30.0);
    let per_row = 4usize;
    let n_panels = d.targets.len();
    let rows = n_panels.div_ceil(per_row);
    let width = per_row as f64 * (pw + pad) + pad;
    let height = rows as f64 * (ph + pad) + pad;
    let lo = d.cells.iter().flat_map(|b| b.outliers.iter().copied().chain([b.whisker_low])).fold(0.0f64, f64::min);
    let hi = d.cells.iter().flat_map(|b| b.outliers.iter().copied().chain([b.whisker_high])).fold(0.0f64, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#);
    for (t, target) in d.targets.iter().enumerate() {
        let ox = pad + (t % per_row) as f64 * (pw + pad);
        let oy = pad + (t / per_row) as f64 * (ph + pad);
        let plot_h = ph - 70.0;
        let ymap = |v: f64| oy + 20.0 + plot_h * (1.0 - (v - lo) / span);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, ox, oy + 10.0, escape(target));
        let _ = writeln!(s, r##"<line x1="{ox}" x2="{}" y1="{}" y2="{}" stroke="#999"/>"##, ox + pw, ymap(0.0), ymap(0.0));
        let bw = pw / d.features.len() as f64;
        for (f, feature) in d.features.iter().enumerate() {
            let b = d.cell(f, t);
            let cx = ox + bw * (f as f64 + 0.5);
            let _ = writeln!(s, r#"<line x1="{cx}" x2="{cx}" y1="{}" y2="{}" stroke="black"/>"#, ymap(b.whisker_high), ymap(b.whisker_low));
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#9ecae1" stroke="black"/>"##,
                cx - bw * 0.3,
                ymap(b.q3),
                bw * 0.6,
                (ymap(b.q1) - ymap(b.q3)).max(0.5)
            );
            let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{}" y2="{}" stroke="black" stroke-width="2"/>"#, cx - bw * 0.3, cx + bw * 0.3, ymap(b.median), ymap(b.median));
            for o in &b.outliers {
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{}" r="1.5"/>"#, ymap(*o));
            }
            let ly = oy + ph - 45.0;
            let _ = writeln!(s, r#"<text x="{cx}" y="{ly}" transform="rotate(60 {cx} {ly})">{}</text>"#, escape(feature));
        }
    }
    s.push_str("</svg>\n");
    s
}
