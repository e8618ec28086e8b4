//! Minimal SVG charts: line/marker plots with linear or log axes, and a
//! diverging heatmap for weight matrices.

use std::fmt::Write;

use polylab_core::WeightMatrix;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self { label: label.into(), points, style }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, scale: Scale) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| usable(*v, scale)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (1.0, 10.0);
        }
        match scale {
            Scale::Log => {
                let (a, b) = (lo.log10().floor(), hi.log10().ceil());
                let b = if b <= a { a + 1.0 } else { b };
                Axis { scale, lo: 10f64.powf(a), hi: 10f64.powf(b) }
            }
            Scale::Linear => {
                if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                    let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
                    (lo, hi) = (lo - pad, hi + pad);
                }
                let step = nice_step((hi - lo) / 5.0);
                Axis { scale, lo: (lo / step).floor() * step, hi: (hi / step).ceil() * step }
            }
        }
    }

    /// Position in `[0, 1]` along the axis.
    fn frac(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log => (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10()),
        }
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => {
                let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
                let stride = ((b - a) / 8 + 1).max(1);
                (a..=b).step_by(stride as usize).map(|e| 10f64.powi(e)).collect()
            }
            Scale::Linear => {
                let step = nice_step((self.hi - self.lo) / 5.0);
                let mut v = self.lo;
                let mut out = Vec::new();
                while v <= self.hi + 0.5 * step {
                    out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
                    v += step;
                }
                out
            }
        }
    }
}

fn usable(v: f64, scale: Scale) -> bool {
    v.is_finite() && (scale == Scale::Linear || v > 0.0)
}

fn nice_step(raw: f64) -> f64 {
    let e = raw.log10().floor();
    let base = 10f64.powf(e);
    let f = raw / base;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * base
}

fn tick_label(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Log => {
            let e = v.log10().round() as i32;
            if (-2..=3).contains(&e) {
                format!("{}", 10f64.powi(e))
            } else {
                format!("1e{e}")
            }
        }
        Scale::Linear => {
            let s = format!("{v:.4}");
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.x_scale = Scale::Log;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.y_scale = Scale::Log;
        self
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let xa = Axis::fit(pts().map(|p| p.0), self.x_scale);
        let ya = Axis::fit(pts().map(|p| p.1), self.y_scale);
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let px = |x: f64| LEFT + xa.frac(x) * pw;
        let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );

        for t in xa.ticks() {
            let x = px(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 18.0,
                tick_label(t, xa.scale)
            );
        }
        for t in ya.ticks() {
            let y = py(t);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t, ya.scale)
            );
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(s, r#"<clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#);
        for (idx, series) in self.series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let visible: Vec<(f64, f64)> = series
                .points
                .iter()
                .filter(|(x, y)| usable(*x, xa.scale) && usable(*y, ya.scale))
                .map(|&(x, y)| (px(x), py(y)))
                .collect();
            match series.style {
                Style::Line | Style::Dashed => {
                    let coords: Vec<String> = visible.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let dash = if series.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline clip-path="url(#plot-area)" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                        coords.join(" ")
                    );
                }
                Style::Markers => {
                    for (x, y) in &visible {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#);
                    }
                }
            }
            let ly = TOP + 10.0 + 18.0 * idx as f64;
            let lx = LEFT + pw + 12.0;
            match series.style {
                Style::Markers => {
                    let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{ly:.1}" r="3" fill="{color}"/>"#, lx + 10.0);
                }
                Style::Line | Style::Dashed => {
                    let dash = if series.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                        lx + 20.0
                    );
                }
            }
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Blue for negative, red for positive, white at zero; the color scale is
/// symmetric around zero with the matrix's largest magnitude at full color.
pub fn heatmap(w: &WeightMatrix, title: &str) -> String {
    let (rows, cols) = (w.rows(), w.cols());
    let cell = (560.0 / cols.max(1) as f64).min(40.0);
    let (left, top) = (60.0, 50.0);
    let width = left + cell * cols as f64 + 40.0;
    let height = top + cell * rows as f64 + 40.0;
    let vmax = w.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, width / 2.0, escape(title));
    for i in 0..rows {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">W{i}</text>"#,
            left - 6.0,
            top + cell * (i as f64 + 0.5) + 4.0
        );
        for k in 0..cols {
            let v = w[(i, k)];
            let a = if vmax > 0.0 { (v.abs() / vmax).min(1.0) } else { 0.0 };
            let fade = (255.0 * (1.0 - a)).round() as u8;
            let color = if v >= 0.0 { format!("#ff{fade:02x}{fade:02x}") } else { format!("#{fade:02x}{fade:02x}ff") };
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{color}" stroke="#cccccc" stroke-width="0.5"><title>W[{i},{k}] = {v}</title></rect>"##,
                left + cell * k as f64,
                top + cell * i as f64
            );
        }
    }
    for k in 0..cols {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
            left + cell * (k as f64 + 0.5),
            top + cell * rows as f64 + 16.0
        );
    }
    s.push_str("</svg>\n");
    s
}
