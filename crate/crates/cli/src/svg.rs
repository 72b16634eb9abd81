//! Minimal deterministic SVG line charts with optional shaded bands.

use std::fmt::Write;

pub struct Line {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    /// `(x, lo, hi)` triples drawn as a translucent area behind the line.
    pub band: Option<Vec<(f64, f64, f64)>>,
}

pub struct Panel {
    pub title: String,
    pub lines: Vec<Line>,
    pub zero_line: bool,
}

pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub panels: Vec<Panel>,
    pub panel_width: f64,
    pub panel_height: f64,
    /// Custom x tick labels; automatic numeric ticks when `None`.
    pub x_ticks: Option<Vec<(f64, String)>>,
}

const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 44.0;
const HEADER: f64 = 28.0;

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let factor = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    factor * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(fig: &Figure) -> String {
    let n = fig.panels.len().max(1) as f64;
    let width = fig.panel_width * n;
    let height = fig.panel_height + HEADER;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(&fig.title)
    );
    for (k, panel) in fig.panels.iter().enumerate() {
        render_panel(&mut out, fig, panel, k as f64 * fig.panel_width, HEADER);
    }
    out.push_str("</svg>\n");
    out
}

fn render_panel(out: &mut String, fig: &Figure, panel: &Panel, ox: f64, oy: f64) {
    let xs = panel.lines.iter().flat_map(|l| l.points.iter().map(|p| p.0));
    let ys = panel.lines.iter().flat_map(|l| {
        l.points
            .iter()
            .map(|p| p.1)
            .chain(l.band.iter().flatten().flat_map(|b| [b.1, b.2]))
    });
    let (Some(xr), Some(yr)) = (extent(xs), extent(ys)) else {
        return;
    };
    let (x0, x1) = if xr.1 > xr.0 { xr } else { padded(xr) };
    let (y0, y1) = padded(if panel.zero_line {
        (yr.0.min(0.0), yr.1.max(0.0))
    } else {
        yr
    });
    let left = ox + MARGIN_LEFT;
    let right = ox + fig.panel_width - MARGIN_RIGHT;
    let top = oy + MARGIN_TOP;
    let bottom = oy + fig.panel_height - MARGIN_BOTTOM;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        (left + right) / 2.0,
        top - 10.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{right:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 4.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let xticks: Vec<(f64, String)> = match &fig.x_ticks {
        Some(v) => v.iter().filter(|(x, _)| *x >= x0 && *x <= x1).cloned().collect(),
        None => ticks(x0, x1).into_iter().map(|t| (t, fmt_tick(t))).collect(),
    };
    for (t, label) in xticks {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            bottom + 4.0,
            bottom + 16.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        bottom + 32.0,
        escape(&fig.x_label)
    );
    if panel.zero_line && y0 < 0.0 && y1 > 0.0 {
        let y = sy(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{right:.1}" y2="{y:.1}" stroke="#888" stroke-dasharray="4 3"/>"##
        );
    }
    for line in &panel.lines {
        if let Some(band) = &line.band {
            let mut d = String::new();
            for (i, (x, _, hi)) in band.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), sy(*hi));
            }
            for (x, lo, _) in band.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", sx(*x), sy(*lo));
            }
            let _ = writeln!(
                out,
                r#"<path d="{}Z" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
                d, line.color
            );
        }
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            line.color
        );
    }
    for (i, line) in panel.lines.iter().enumerate() {
        let y = top + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + 8.0,
            y - 4.0,
            left + 24.0,
            y - 4.0,
            line.color,
            left + 28.0,
            y,
            escape(&line.label)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_numbers() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(fmt_tick(0.6000000000000001), "0.6");
        assert_eq!(fmt_tick(-0.0), "0");
    }

    #[test]
    fn render_is_well_formed_and_stable() {
        let fig = Figure {
            title: "a & b".into(),
            x_label: "tau".into(),
            panels: vec![Panel {
                title: "p".into(),
                lines: vec![Line {
                    label: "l".into(),
                    color: "#1f77b4",
                    points: vec![(0.1, 1.0), (0.5, 2.0)],
                    band: Some(vec![(0.1, 0.5, 1.5), (0.5, 1.5, 2.5)]),
                }],
                zero_line: true,
            }],
            panel_width: 300.0,
            panel_height: 240.0,
            x_ticks: None,
        };
        let a = render(&fig);
        assert_eq!(a, render(&fig));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a &amp; b"));
        assert_eq!(a.matches("<path").count(), 1);
    }
}
