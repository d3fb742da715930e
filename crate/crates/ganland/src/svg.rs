//! Minimal static SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line plot with axes, tick labels at the range ends and a legend.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], y_range: Option<(f64, f64)>) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = y_range.unwrap_or_else(|| range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{v:.3}</text>"#, H - PAD + 14.0);
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{v:.3}</text>"#, PAD - 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            if !y.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
            pen_down = true;
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = PAD + 14.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#, W - PAD, escape(s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Grid of cells shaded from white (0) to dark blue (1); NaN cells are grey.
pub fn heatmap(title: &str, row_label: &str, rows: &[String], col_label: &str, cols: &[String], values: &[Vec<f64>]) -> String {
    let cw = (W - 2.0 * PAD) / cols.len().max(1) as f64;
    let ch = (H - 2.0 * PAD) / rows.len().max(1) as f64;
    let mut out = String::new();
    header(&mut out, title);
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (x, y) = (PAD + j as f64 * cw, PAD + i as f64 * ch);
            let fill = if v.is_finite() {
                let t = v.clamp(0.0, 1.0);
                let c = |full: f64| (255.0 - t * (255.0 - full)).round() as u8;
                format!("#{:02x}{:02x}{:02x}", c(8.0), c(48.0), c(107.0))
            } else {
                "#bbbbbb".into()
            };
            let text = if t_is_dark(v) { "white" } else { "black" };
            let _ = writeln!(out, r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}" stroke="white"/>"#);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" dominant-baseline="middle" fill="{text}">{}</text>"#,
                x + cw / 2.0,
                y + ch / 2.0,
                if v.is_finite() { format!("{v:.2}") } else { "NaN".into() }
            );
        }
    }
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#, PAD - 4.0, PAD + (i as f64 + 0.5) * ch, escape(r));
    }
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, PAD + (j as f64 + 0.5) * cw, H - PAD + 14.0, escape(c));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(col_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(row_label)
    );
    out.push_str("</svg>\n");
    out
}

fn t_is_dark(v: f64) -> bool {
    v.is_finite() && v > 0.55
}
