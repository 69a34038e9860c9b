//! Minimal self-emitted SVG figures.

use std::fmt::Write;

use segfair_core::embedding::Density;
use segfair_core::metrics::percentile;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub fn group_color(group: &str) -> &'static str {
    match group {
        "Young" => "#1f77b4",
        "Middle" => "#2ca02c",
        "Older" => "#d62728",
        _ => "#7f7f7f",
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        let pad = if hi > lo { (hi - lo) * 0.05 } else { lo.abs().max(1.0) * 0.05 };
        Axis { lo: lo - pad, hi: hi + pad }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

struct Plot {
    body: String,
    x: Axis,
    y: Axis,
}

impl Plot {
    fn px(&self, v: f64) -> f64 {
        LEFT + self.x.frac(v) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - self.y.frac(v) * (H - TOP - BOTTOM)
    }

    fn new(title: &str, xlabel: &str, ylabel: &str, x: Axis, y: Axis, timestamp: Option<u64>) -> Self {
        let mut body = String::new();
        writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        if let Some(ts) = timestamp {
            writeln!(body, "<!-- generated-unix-time: {ts} -->").unwrap();
        }
        writeln!(body, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(body, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title)).unwrap();
        let plot = Plot { body, x, y };
        plot.with_axes(xlabel, ylabel)
    }

    fn with_axes(mut self, xlabel: &str, ylabel: &str) -> Self {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        writeln!(
            self.body,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x.lo + t * (self.x.hi - self.x.lo);
            let yv = self.y.lo + t * (self.y.hi - self.y.lo);
            let (px, py) = (self.px(xv), self.py(yv));
            writeln!(
                self.body,
                r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 4.0,
                y0 + 18.0,
                tick(xv)
            )
            .unwrap();
            writeln!(
                self.body,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 7.0,
                py + 4.0,
                tick(yv)
            )
            .unwrap();
        }
        writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            esc(xlabel)
        )
        .unwrap();
        writeln!(
            self.body,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(ylabel)
        )
        .unwrap();
        self
    }

    fn legend(&mut self, groups: &[&str]) {
        for (i, g) in groups.iter().enumerate() {
            let y = TOP + 10.0 + i as f64 * 18.0;
            writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{y:.2}" r="5" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                W - RIGHT + 20.0,
                group_color(g),
                W - RIGHT + 30.0,
                y + 4.0,
                esc(g)
            )
            .unwrap();
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn distinct_groups<'a>(points: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen: Vec<&str> = Vec::new();
    for g in points {
        if !seen.contains(&g) {
            seen.push(g);
        }
    }
    seen
}

pub struct ScatterPoint<'a> {
    pub x: f64,
    pub y: f64,
    pub group: &'a str,
}

/// Scatter plot with an optional fitted line `y = slope * x + intercept`.
pub fn scatter_with_fit(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[ScatterPoint],
    fit: Option<(f64, f64)>,
    annotation: Option<&str>,
    timestamp: Option<u64>,
) -> String {
    let x = Axis::fit(points.iter().map(|p| p.x));
    let y = Axis::fit(points.iter().map(|p| p.y));
    let mut plot = Plot::new(title, xlabel, ylabel, x, y, timestamp);
    for p in points {
        writeln!(
            plot.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            plot.px(p.x),
            plot.py(p.y),
            group_color(p.group)
        )
        .unwrap();
    }
    if let Some((slope, intercept)) = fit {
        let (a, b) = (plot.x.lo, plot.x.hi);
        writeln!(
            plot.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            plot.px(a),
            plot.py(slope * a + intercept),
            plot.px(b),
            plot.py(slope * b + intercept)
        )
        .unwrap();
    }
    if let Some(text) = annotation {
        writeln!(plot.body, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT + 10.0, TOP + 14.0, esc(text)).unwrap();
    }
    let groups = distinct_groups(points.iter().map(|p| p.group));
    plot.legend(&groups);
    plot.finish()
}

/// Per-group box plots: quartile box, median bar, 1.5 IQR whiskers, outliers.
pub fn box_plots(title: &str, ylabel: &str, groups: &[(String, Vec<f64>)], timestamp: Option<u64>) -> String {
    let y = Axis::fit(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let x = Axis {
        lo: 0.0,
        hi: groups.len().max(1) as f64,
    };
    let mut plot = Plot::new(title, "age group", ylabel, x, y, timestamp);
    for (i, (name, values)) in groups.iter().enumerate() {
        if values.is_empty() {
            continue;
        }
        let mut v = values.clone();
        let q = |v: &mut Vec<f64>, p| percentile(v, p).expect("non-empty");
        let (q1, med, q3) = (q(&mut v, 0.25), q(&mut v, 0.5), q(&mut v, 0.75));
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
        let wlo = inside.iter().copied().fold(f64::INFINITY, f64::min);
        let whi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cx = plot.px(i as f64 + 0.5);
        let half = 0.3 * (plot.px(1.0) - plot.px(0.0));
        let color = group_color(name);
        writeln!(
            plot.body,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            plot.py(wlo),
            plot.py(whi)
        )
        .unwrap();
        writeln!(
            plot.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.5" stroke="black"/>"#,
            cx - half,
            plot.py(q3),
            2.0 * half,
            (plot.py(q1) - plot.py(q3)).max(0.5)
        )
        .unwrap();
        writeln!(
            plot.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            plot.py(med),
            cx + half,
            plot.py(med)
        )
        .unwrap();
        for o in v.iter().filter(|x| **x < lo_fence || **x > hi_fence) {
            writeln!(plot.body, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#, plot.py(*o)).unwrap();
        }
        writeln!(
            plot.body,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{} (n={})</text>"#,
            TOP - 4.0,
            esc(name),
            values.len()
        )
        .unwrap();
    }
    plot.finish()
}

/// Scatter of a 2-D embedding on the left and per-group densities of the
/// first coordinate drawn as step curves underneath.
pub fn embedding_with_density(
    title: &str,
    points: &[ScatterPoint],
    densities: &[(String, Density)],
    timestamp: Option<u64>,
) -> String {
    let mut svg = scatter_with_fit(title, "t-SNE 1", "t-SNE 2", points, None, None, timestamp);
    svg.truncate(svg.len() - "</svg>\n".len());
    let x = Axis::fit(points.iter().map(|p| p.x));
    let ymax = densities
        .iter()
        .flat_map(|(_, d)| d.density.iter().copied())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let (band_top, band_h) = (H + 20.0, 160.0);
    let px = |v: f64| LEFT + x.frac(v) * (W - LEFT - RIGHT);
    let py = |v: f64| band_top + band_h - v / ymax * band_h;
    let mut extra = String::new();
    writeln!(
        extra,
        r#"<rect y="{H}" width="{W}" height="{}" fill="white"/><text x="{LEFT}" y="{:.2}">density of t-SNE 1</text>"#,
        band_h + 40.0,
        band_top - 4.0
    )
    .unwrap();
    writeln!(
        extra,
        r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        band_top + band_h,
        W - RIGHT,
        band_top + band_h
    )
    .unwrap();
    for (group, d) in densities {
        let mut path = String::new();
        if d.spike {
            write!(path, "M{:.2},{:.2} L{:.2},{:.2}", px(d.lo), py(0.0), px(d.lo), band_top).unwrap();
        } else {
            write!(path, "M{:.2},{:.2}", px(d.lo), py(0.0)).unwrap();
            for (b, v) in d.density.iter().enumerate() {
                let a = d.lo + b as f64 * d.bin_width;
                write!(path, " L{:.2},{:.2} L{:.2},{:.2}", px(a), py(*v), px(a + d.bin_width), py(*v)).unwrap();
            }
            write!(path, " L{:.2},{:.2}", px(d.hi), py(0.0)).unwrap();
        }
        writeln!(extra, r#"<path d="{path}" fill="none" stroke="{}" stroke-width="1.5"/>"#, group_color(group)).unwrap();
    }
    let total_h = H + band_h + 40.0;
    let svg = svg.replacen(&format!(r#"height="{H}" viewBox="0 0 {W} {H}""#), &format!(r#"height="{total_h}" viewBox="0 0 {W} {total_h}""#), 1);
    format!("{svg}{extra}</svg>\n")
}
