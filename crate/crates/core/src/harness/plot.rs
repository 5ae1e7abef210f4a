//! Minimal SVG line charts and heat maps.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    /// Missing points break the line.
    pub points: Vec<(f64, Option<f64>)>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(title: &str, width: f64, height: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1)));
    let y0 = y0.min(0.0);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(title, W, H);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            H - PAD + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            PAD - 4.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen = false;
        for &(x, y) in &ser.points {
            match y {
                Some(y) if y.is_finite() => {
                    let _ = write!(d, "{}{:.1},{:.1} ", if pen { "L" } else { "M" }, sx(x), sy(y));
                    pen = true;
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
                _ => pen = false,
            }
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 14.0 * k as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Cells `(x, y, value)` on a regular grid; missing values are grey.
pub fn heat_map(title: &str, cells: &[(f64, f64, Option<f64>)], step: f64) -> String {
    let (x0, x1) = range(cells.iter().map(|c| c.0));
    let (y0, y1) = range(cells.iter().map(|c| c.1));
    let (v0, v1) = range(cells.iter().filter_map(|c| c.2));
    let nx = ((x1 - x0) / step).round() + 1.0;
    let ny = ((y1 - y0) / step).round() + 1.0;
    let cw = (W - 2.0 * PAD) / nx;
    let ch = (H - 2.0 * PAD) / ny;
    let mut s = header(title, W + 80.0, H);
    for &(x, y, v) in cells {
        let px = PAD + ((x - x0) / step).round() * cw;
        let py = H - PAD - (((y - y0) / step).round() + 1.0) * ch;
        let fill = match v {
            Some(v) => color_ramp((v - v0) / (v1 - v0)),
            None => "#bbbbbb".to_string(),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{px:.1}" y="{py:.1}" width="{:.1}" height="{:.1}" fill="{fill}"/>"#,
            cw + 0.5,
            ch + 0.5
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">{}</text>"#,
        W - PAD + 8.0,
        PAD + 10.0,
        tick(v1)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - PAD + 8.0, H - PAD, tick(v0));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">x {} .. {} m, y {} .. {} m</text>"#,
        W / 2.0,
        H - 16.0,
        x0,
        x1,
        y0,
        y1
    );
    s.push_str("</svg>\n");
    s
}

fn color_ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn save(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_skips_missing_points() {
        let s = Series {
            label: "a".into(),
            points: vec![(1.0, Some(1.0)), (2.0, None), (3.0, Some(2.0))],
        };
        let svg = line_chart("t", "x", "y", &[s]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches(" L").count(), 0);
    }

    #[test]
    fn heat_map_draws_every_cell() {
        let cells = vec![
            (0.0, 0.0, Some(1.0)),
            (10.0, 0.0, None),
            (0.0, 10.0, Some(3.0)),
            (10.0, 10.0, Some(2.0)),
        ];
        let svg = heat_map("h", &cells, 10.0);
        assert_eq!(svg.matches("<rect").count(), 5);
        assert!(svg.contains("#bbbbbb"));
    }
}
