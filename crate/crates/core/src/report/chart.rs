//! Static SVG line charts with optional confidence bands.
//!
//! Output depends only on the input: no timestamps, no randomness, fixed
//! number formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XAxis {
    /// Model width, log-scaled.
    Width,
    /// Training step, linear.
    Step,
    /// Fairness constraint level, linear.
    Thr,
}

impl XAxis {
    fn is_log(self) -> bool {
        matches!(self, XAxis::Width)
    }

    fn label(self) -> &'static str {
        match self {
            XAxis::Width => "width",
            XAxis::Step => "step",
            XAxis::Thr => "thr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub y: Vec<f64>,
    /// Half-widths of a band drawn around `y`.
    pub ci: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub title: String,
    pub axis: XAxis,
    pub x: Vec<f64>,
    pub y_label: String,
    pub series: Vec<Series>,
    /// x positions highlighted with a dashed rule and a tick label.
    pub marks: Vec<f64>,
    pub output: Option<PathBuf>,
}

impl ChartSpec {
    pub fn new(title: impl Into<String>, axis: XAxis, x: Vec<f64>) -> Self {
        Self {
            title: title.into(),
            axis,
            x,
            y_label: String::new(),
            series: Vec::new(),
            marks: Vec::new(),
            output: None,
        }
    }

    pub fn with_series(mut self, label: impl Into<String>, y: Vec<f64>, ci: Option<Vec<f64>>) -> Self {
        self.series.push(Series {
            label: label.into(),
            y,
            ci,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::InvalidConfig("chart needs at least one series".into()));
        }
        if self.x.is_empty() {
            return Err(Error::Empty("chart x values"));
        }
        let check = |what: &str, values: &[f64]| -> Result<()> {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSeries(what.to_string()));
            }
            Ok(())
        };
        check("x", &self.x)?;
        check("marks", &self.marks)?;
        if self.axis.is_log() && self.x.iter().chain(&self.marks).any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig("log-scaled x values must be positive".into()));
        }
        for s in &self.series {
            if s.y.len() != self.x.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.x.len(),
                    actual: s.y.len(),
                    context: "series length vs x",
                });
            }
            check(&s.label, &s.y)?;
            if let Some(ci) = &s.ci {
                if ci.len() != self.x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.x.len(),
                        actual: ci.len(),
                        context: "band length vs x",
                    });
                }
                check(&s.label, ci)?;
            }
        }
        Ok(())
    }
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Compact tick label: integers without decimals, others to 4 significant places.
pub fn format_tick(v: f64) -> String {
    if v == v.round() && v.abs() < 1e9 {
        return format!("{}", v as i64);
    }
    let s = format!("{:.4}", v);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5);
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + step * 1e-9 {
        ticks.push(k * step);
        k += 1.0;
    }
    ticks
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    log: bool,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let v = if self.log { x.log10() } else { x };
        LEFT + (v - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - LEFT - RIGHT)
    }

    fn ty(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Renders a standalone SVG document.
pub fn render_chart(spec: &ChartSpec) -> Result<String> {
    spec.validate()?;
    let log = spec.axis.is_log();
    let xt = |x: f64| if log { x.log10() } else { x };
    let xs = spec.x.iter().chain(&spec.marks).map(|&x| xt(x));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &spec.series {
        for (i, &y) in s.y.iter().enumerate() {
            let h = s.ci.as_ref().map_or(0.0, |c| c[i].abs());
            y_min = y_min.min(y - h);
            y_max = y_max.max(y + h);
        }
    }
    let (x_lo, x_hi) = padded(x_min, x_max);
    let (y_lo, y_hi) = padded(y_min, y_max);
    let f = Frame {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
        log,
    };

    let mut svg = String::new();
    let w = &mut svg;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&spec.title)
    );
    let (px0, px1, py0, py1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        w,
        r##"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        px1 - px0,
        py1 - py0
    );

    // x ticks: every data position on a log axis, round numbers otherwise;
    // marks are always labelled.
    let mut x_ticks: Vec<f64> = if log {
        spec.x.clone()
    } else {
        linear_ticks(x_lo, x_hi)
    };
    x_ticks.extend(spec.marks.iter().copied());
    x_ticks.sort_by(f64::total_cmp);
    x_ticks.dedup();
    let _ = writeln!(w, r#"<g class="x-ticks" text-anchor="middle">"#);
    for &t in &x_ticks {
        let x = f.tx(t);
        if x < px0 - 1e-9 || x > px1 + 1e-9 {
            continue;
        }
        let _ = writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{py1:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}">{}</text>"##,
            py1 + 5.0,
            py1 + 18.0,
            format_tick(t)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r#"<g class="y-ticks" text-anchor="end">"#);
    for t in linear_ticks(y_lo, y_hi) {
        let y = f.ty(t);
        let _ = writeln!(
            w,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{px0:.2}" y2="{y:.2}" stroke="#333"/><line x1="{px0:.2}" y1="{y:.2}" x2="{px1:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}">{}</text>"##,
            px0 - 5.0,
            px0 - 8.0,
            y + 4.0,
            format_tick(t)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (px0 + px1) / 2.0,
        HEIGHT - 18.0,
        if log { "width (log scale)" } else { spec.axis.label() }
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0,
        escape(&spec.y_label)
    );

    for &m in &spec.marks {
        let x = f.tx(m);
        let _ = writeln!(
            w,
            r##"<line class="mark" x1="{x:.2}" y1="{py0:.2}" x2="{x:.2}" y2="{py1:.2}" stroke="#555" stroke-dasharray="4 3"/>"##
        );
    }

    for (k, s) in spec.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some(ci) = &s.ci {
            let mut pts = String::new();
            for (i, &x) in spec.x.iter().enumerate() {
                let _ = write!(pts, "{:.2},{:.2} ", f.tx(x), f.ty(s.y[i] + ci[i].abs()));
            }
            for (i, &x) in spec.x.iter().enumerate().rev() {
                let _ = write!(pts, "{:.2},{:.2} ", f.tx(x), f.ty(s.y[i] - ci[i].abs()));
            }
            let _ = writeln!(
                w,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                pts.trim_end()
            );
        }
        let path: Vec<String> = spec
            .x
            .iter()
            .zip(&s.y)
            .map(|(&x, &y)| format!("{:.2},{:.2}", f.tx(x), f.ty(y)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline class="line" points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            path.join(" ")
        );
        for (&x, &y) in spec.x.iter().zip(&s.y) {
            let _ = writeln!(
                w,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                f.tx(x),
                f.ty(y)
            );
        }
        let ly = py0 + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            px1 + 12.0,
            px1 + 32.0,
            px1 + 38.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

/// Renders and writes to `spec.output`, or to `path` when given.
pub fn write_chart(spec: &ChartSpec, path: Option<&Path>) -> Result<()> {
    let target = path
        .map(Path::to_path_buf)
        .or_else(|| spec.output.clone())
        .ok_or_else(|| Error::InvalidConfig("chart has no output path".into()))?;
    let svg = render_chart(spec)?;
    fs::write(&target, svg).map_err(|e| Error::io(&target, e))
}
