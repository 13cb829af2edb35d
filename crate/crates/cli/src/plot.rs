//! Minimal static SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric half-widths drawn as vertical bars.
    pub errors: Option<Vec<f64>>,
    pub markers: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        Self {
            label: label.into(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
            errors: None,
            markers: false,
        }
    }

    pub fn with_errors(mut self, errors: Vec<f64>) -> Self {
        self.errors = Some(errors);
        self.markers = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub series: Vec<Series>,
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.x_scale = Scale::Log;
        self
    }

    pub fn series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn render(&self) -> String {
        let usable = |x: f64| x.is_finite() && (self.x_scale == Scale::Linear || x > 0.0);
        let xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .filter(|x| usable(*x))
            .collect();
        let ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| {
                s.points.iter().enumerate().flat_map(move |(i, p)| {
                    let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                    [p.1 - e, p.1 + e]
                })
            })
            .filter(|y| y.is_finite())
            .collect();
        let (x0, x1) = padded_range(&xs, self.x_scale);
        let (y0, y1) = padded_range(&ys, Scale::Linear);
        let frame = Frame {
            x0,
            x1,
            y0,
            y1,
            x_scale: self.x_scale,
        };

        let mut svg = header(&self.title);
        frame.axes(&mut svg, &self.x_label, &self.y_label);
        for (k, s) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|p| usable(p.0) && p.1.is_finite())
                .map(|&(x, y)| frame.map(x, y))
                .collect();
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            if let Some(errors) = &s.errors {
                for (&(x, y), e) in s.points.iter().zip(errors) {
                    let (px, lo) = frame.map(x, y - e);
                    let (_, hi) = frame.map(x, y + e);
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{px:.2}" y1="{lo:.2}" x2="{px:.2}" y2="{hi:.2}" stroke="{colour}"/>"#
                    );
                }
            }
            if s.markers {
                for (x, y) in &pts {
                    let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{colour}"/>"#);
                }
            }
            if self.series.len() > 1 {
                let ly = TOP + 14.0 + 16.0 * k as f64;
                let lx = WIDTH - RIGHT - 150.0;
                let _ = writeln!(
                    svg,
                    r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" font-size="12">{}</text>"#,
                    lx + 20.0,
                    lx + 26.0,
                    ly + 4.0,
                    escape(&s.label)
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Colour map of a signed field on a regular grid; red positive, blue negative.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], values: &[Vec<f64>]) -> String {
    let (x0, x1) = edges(xs);
    let (y0, y1) = edges(ys);
    let frame = Frame {
        x0,
        x1,
        y0,
        y1,
        x_scale: Scale::Linear,
    };
    let peak = values
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { m });
    let mut svg = header(title);
    let dx = (x1 - x0) / xs.len() as f64;
    let dy = (y1 - y0) / ys.len() as f64;
    for (iy, row) in values.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            let (px, py) = frame.map(xs[ix] - dx / 2.0, ys[iy] + dy / 2.0);
            let (qx, qy) = frame.map(xs[ix] + dx / 2.0, ys[iy] - dy / 2.0);
            let level = if peak > 0.0 { (v / peak).abs().sqrt() } else { 0.0 };
            let fade = (255.0 * (1.0 - level)).round() as u8;
            let fill = if *v >= 0.0 {
                format!("rgb(255,{fade},{fade})")
            } else {
                format!("rgb({fade},{fade},255)")
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                qx - px + 0.3,
                qy - py + 0.3
            );
        }
    }
    frame.axes(&mut svg, x_label, y_label);
    svg.push_str("</svg>\n");
    svg
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    x_scale: Scale,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let (a, b, v) = match self.x_scale {
            Scale::Linear => (self.x0, self.x1, x),
            Scale::Log => (self.x0.log10(), self.x1.log10(), x.log10()),
        };
        LEFT + (v - a) / (b - a) * (WIDTH - LEFT - RIGHT)
    }

    fn ty(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (self.tx(x), self.ty(y))
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        let x_ticks = match self.x_scale {
            Scale::Linear => linear_ticks(self.x0, self.x1),
            Scale::Log => log_ticks(self.x0, self.x1),
        };
        for x in x_ticks {
            let px = self.tx(x);
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                b + 5.0,
                b + 18.0,
                tick_label(x)
            );
        }
        for y in linear_ticks(self.y0, self.y1) {
            let py = self.ty(y);
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                l - 5.0,
                l - 8.0,
                py + 4.0,
                tick_label(y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            HEIGHT - 14.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18,{:.1}) rotate(-90)" font-size="13" text-anchor="middle">{}</text>"#,
            (t + b) / 2.0,
            escape(y_label)
        );
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn padded_range(values: &[f64], scale: Scale) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return match scale {
            Scale::Linear => (0.0, 1.0),
            Scale::Log => (1.0, 10.0),
        };
    }
    match scale {
        Scale::Log if hi > lo => (lo, hi),
        Scale::Log => (lo / 2.0, lo * 2.0),
        Scale::Linear if hi > lo => {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
        Scale::Linear => {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo - pad, hi + pad)
        }
    }
}

fn edges(centres: &[f64]) -> (f64, f64) {
    match centres {
        [] => (0.0, 1.0),
        [c] => (c - 0.5, c + 0.5),
        [first, .., last] => {
            let half = (last - first) / (centres.len() - 1) as f64 / 2.0;
            (first - half, last + half)
        }
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let first = lo.log10().ceil() as i32;
    let last = hi.log10().floor() as i32;
    (first..=last).map(|e| 10f64.powi(e)).collect()
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
