//! Minimal standalone SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YScale {
    Linear,
    Log,
}

impl std::str::FromStr for YScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(YScale::Linear),
            "log" => Ok(YScale::Log),
            _ => Err(format!("unknown y scale `{s}` (expected linear or log)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Points from this index on are drawn dashed.
    pub dashed_from: Option<usize>,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn usable(y: f64, scale: YScale) -> bool {
    y.is_finite() && (scale == YScale::Linear || y > 0.0)
}

fn transform(y: f64, scale: YScale) -> f64 {
    match scale {
        YScale::Linear => y,
        YScale::Log => y.log10(),
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64, scale: YScale) -> String {
    match scale {
        YScale::Log => format!("1e{}", v.round() as i64),
        YScale::Linear => {
            if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
                let s = format!("{v:.4}");
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            } else {
                format!("{v:.2e}")
            }
        }
    }
}

/// Renders the chart. Fails if no series has a drawable point.
pub fn render(series: &[Series], scale: YScale, x_label: &str) -> Result<String, String> {
    let drawable = || {
        series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|&(x, y)| x.is_finite() && usable(y, scale))
    };
    let (x0, x1) = range(drawable().map(|(x, _)| x)).ok_or("no drawable points")?;
    let (mut y0, mut y1) = range(drawable().map(|(_, y)| transform(y, scale))).ok_or("no drawable points")?;
    if scale == YScale::Log {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (1.0 - (transform(y, scale) - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let y_ticks: Vec<f64> = match scale {
        YScale::Linear => linear_ticks(y0, y1),
        YScale::Log => (y0 as i64..=y1 as i64).map(|d| d as f64).collect(),
    };
    for t in y_ticks {
        let y = TOP + (1.0 - (t - y0) / (y1 - y0)) * plot_h;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            escape(&tick_label(t, scale))
        );
    }
    for t in linear_ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            escape(&tick_label(t, YScale::Linear))
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let split = s.dashed_from.unwrap_or(s.points.len()).min(s.points.len());
        let coords = |pts: &[(f64, f64)]| -> String {
            pts.iter()
                .filter(|&&(x, y)| x.is_finite() && usable(y, scale))
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let solid = coords(&s.points[..(split + 1).min(s.points.len())]);
        if !solid.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{solid}"/>"#
            );
        }
        if split < s.points.len() {
            let dashed = coords(&s.points[split..]);
            if !dashed.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="6,4" points="{dashed}"/>"#
                );
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & 'c'"), "a&lt;b &amp; &apos;c&apos;");
    }

    #[test]
    fn ticks_cover_range() {
        let t = linear_ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dashed_tail_emits_second_polyline() {
        let s = Series {
            label: "loss".into(),
            points: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 4.0), (3.0, 90.0)],
            dashed_from: Some(1),
        };
        let svg = render(&[s], YScale::Log, "wall_s").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
    }

    #[test]
    fn nothing_to_draw() {
        let s = Series {
            label: "x".into(),
            points: vec![(0.0, -1.0)],
            dashed_from: None,
        };
        assert!(render(&[s], YScale::Log, "wall_s").is_err());
    }
}
