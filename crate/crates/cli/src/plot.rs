//! Self-contained SVG line charts for metric traces.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Logarithmic `k` and metric axes.
    Loglog,
    /// Linear `k`, logarithmic metric.
    Semilog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Bound overlays are drawn dashed.
    pub dashed: bool,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|f| f * mag)
        .find(|s| span / s <= 7.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.floor() as i32, hi.ceil() as i32);
    let every = ((b - a) / 8).max(1);
    (a..=b).filter(|e| (e - a) % every == 0).map(f64::from).collect()
}

/// Points transformed to plot coordinates; unusable points (log of nonpositive) dropped.
fn transform(points: &[(f64, f64)], scale: Scale) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|(k, v)| *v > 0.0 && v.is_finite() && (scale == Scale::Semilog || *k > 0.0))
        .map(|&(k, v)| {
            let x = match scale {
                Scale::Loglog => k.log10(),
                Scale::Semilog => k,
            };
            (x, v.log10())
        })
        .collect()
}

/// Renders the series, or `None` if no series has a plottable point.
pub fn render(series: &[Series], scale: Scale, metric: &str, title: &str) -> Option<String> {
    let data: Vec<Vec<(f64, f64)>> = series.iter().map(|s| transform(&s.points, scale)).collect();
    let all: Vec<&(f64, f64)> = data.iter().flatten().collect();
    if all.is_empty() {
        return None;
    }
    let fold = |f: fn(&(f64, f64)) -> f64| {
        all.iter()
            .map(|p| f(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (mut x0, mut x1) = fold(|p| p.0);
    let (mut y0, mut y1) = fold(|p| p.1);
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let xt = match scale {
        Scale::Loglog => decade_ticks(x0, x1),
        Scale::Semilog => linear_ticks(x0, x1),
    };
    for t in xt.into_iter().filter(|t| *t >= x0 - 1e-9 && *t <= x1 + 1e-9) {
        let label = match scale {
            Scale::Loglog => format!("1e{}", t as i32),
            Scale::Semilog => format!("{t}"),
        };
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"##,
            TOP + ph,
            TOP + ph + 18.0
        );
    }
    for t in decade_ticks(y0, y1).into_iter().filter(|t| *t >= y0 - 1e-9 && *t <= y1 + 1e-9) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            t as i32
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">k</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(metric)
    );
    for (i, (ser, pts)) in series.iter().zip(&data).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series_is_a_straight_semilog_line() {
        let pts: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.5f64.powi(k))).collect();
        let t = transform(&pts, Scale::Semilog);
        let slopes: Vec<f64> = t.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        for s in &slopes {
            assert!((s - slopes[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn power_law_has_slope_minus_one_on_loglog() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 4.0 / k.max(1) as f64)).collect();
        let t = transform(&pts, Scale::Loglog);
        assert_eq!(t.len(), 49);
        let s = (t[48].1 - t[0].1) / (t[48].0 - t[0].0);
        assert!((s + 1.0).abs() < 1e-12);
    }

    #[test]
    fn nothing_plottable_gives_none() {
        let s = Series {
            label: "zero".into(),
            points: vec![(0.0, 0.0), (1.0, 0.0)],
            dashed: false,
        };
        assert!(render(&[s], Scale::Semilog, "u0", "t").is_none());
    }

    #[test]
    fn labels_are_escaped() {
        let s = Series {
            label: "a<b".into(),
            points: vec![(1.0, 1.0), (2.0, 0.5)],
            dashed: true,
        };
        let svg = render(&[s], Scale::Loglog, "w_1 & co", "t").unwrap();
        assert!(svg.contains("a&lt;b") && svg.contains("w_1 &amp; co"));
        assert!(svg.contains("stroke-dasharray"));
    }
}
