//! SVG rendering of regions and rasters.
//!
//! Output is a fixed 800x600 canvas. Two-node regions are drawn as rectangles
//! in the plane of the two node withdrawals, optionally over a raster; larger
//! regions become one row of interval bars per node. Numbers are printed with
//! fixed precision so identical inputs give identical bytes.

use std::fmt::Write;

use crate::region::{CellState, DSRegion, Raster, RegionMode};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

const DYNAMIC_COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#9467bd", "#17becf"];
const STEADY_COLORS: [&str; 2] = ["#d62728", "#ff7f0e"];

/// Region drawn with a legend label.
#[derive(Debug, Clone)]
pub struct Layer<'a> {
    pub label: String,
    pub region: &'a DSRegion,
}

impl<'a> Layer<'a> {
    pub fn new(label: impl Into<String>, region: &'a DSRegion) -> Self {
        Self { label: label.into(), region }
    }
}

#[derive(Debug, Clone, Copy)]
struct Span {
    lo: f64,
    hi: f64,
}

impl Span {
    fn empty() -> Self {
        Self {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, v: f64) {
        if v.is_finite() {
            self.lo = self.lo.min(v);
            self.hi = self.hi.max(v);
        }
    }

    /// Pads by 8% and widens degenerate spans.
    fn padded(self) -> Self {
        if !self.lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        let w = self.hi - self.lo;
        let pad = if w > 0.0 { 0.08 * w } else { self.lo.abs().max(1.0) * 0.1 };
        Self {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }
}

/// Tick positions on a 1-2-5 grid, about five per axis.
fn ticks(span: Span) -> Vec<f64> {
    let raw = (span.hi - span.lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (span.lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= span.hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    out: String,
    x: Span,
    y: Span,
}

impl Canvas {
    fn new(x: Span, y: Span) -> Self {
        let mut out = String::new();
        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
        Self { out, x, y }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }

    fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, style: &str) {
        let (a, b) = (self.px(x0.min(x1)), self.px(x0.max(x1)));
        let (c, d) = (self.py(y0.max(y1)), self.py(y0.min(y1)));
        writeln!(self.out, r#"<rect x="{a:.2}" y="{c:.2}" width="{:.2}" height="{:.2}" {style}/>"#, (b - a).max(0.5), (d - c).max(0.5)).unwrap();
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, extra: &str, s: &str) {
        writeln!(self.out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}"{extra}>{}</text>"#, escape(s)).unwrap();
    }

    fn frame(&mut self, xlabel: &str, ylabel: Option<&str>, yticks: bool) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (TOP, HEIGHT - BOTTOM);
        writeln!(self.out, r##"<rect x="{x0}" y="{y0}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##, x1 - x0, y1 - y0).unwrap();
        for t in ticks(self.x) {
            let p = self.px(t);
            writeln!(self.out, r##"<line x1="{p:.2}" y1="{y1}" x2="{p:.2}" y2="{:.2}" stroke="#333"/>"##, y1 + 5.0).unwrap();
            self.text(p, y1 + 19.0, "middle", "", &fmt_tick(t));
        }
        if yticks {
            for t in ticks(self.y) {
                let p = self.py(t);
                writeln!(self.out, r##"<line x1="{:.2}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#333"/>"##, x0 - 5.0).unwrap();
                self.text(x0 - 8.0, p + 4.0, "end", "", &fmt_tick(t));
            }
        }
        self.text((x0 + x1) / 2.0, HEIGHT - 25.0, "middle", "", xlabel);
        if let Some(label) = ylabel {
            let cy = (y0 + y1) / 2.0;
            self.text(22.0, cy, "middle", &format!(r#" transform="rotate(-90 22 {cy:.2})""#), label);
        }
    }

    fn legend(&mut self, entries: &[(String, String)]) {
        let x = WIDTH - RIGHT + 15.0;
        for (k, (label, style)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 22.0 * k as f64;
            writeln!(self.out, r#"<rect x="{x:.2}" y="{y:.2}" width="16" height="12" {style}/>"#).unwrap();
            self.text(x + 22.0, y + 10.0, "start", "", label);
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn layer_colors(layers: &[Layer<'_>]) -> Vec<&'static str> {
    let (mut d, mut s) = (0, 0);
    layers
        .iter()
        .map(|l| match l.region.mode {
            RegionMode::Dynamic => {
                d += 1;
                DYNAMIC_COLORS[(d - 1) % DYNAMIC_COLORS.len()]
            }
            RegionMode::Steady => {
                s += 1;
                STEADY_COLORS[(s - 1) % STEADY_COLORS.len()]
            }
        })
        .collect()
}

fn cell_fill(state: CellState) -> &'static str {
    match state {
        CellState::Secure => "#c7e9c0",
        CellState::Insecure => "#eeeeee",
        CellState::Diverged => "#fdd0a2",
    }
}

fn cell_edges(centres: &[f64]) -> Vec<f64> {
    let n = centres.len();
    let half = if n > 1 { (centres[1] - centres[0]) / 2.0 } else { 0.5 };
    let mut e: Vec<f64> = centres.iter().map(|c| c - half).collect();
    e.push(centres[n - 1] + half);
    e
}

fn draw_raster(c: &mut Canvas, raster: &Raster) {
    let ex = cell_edges(&raster.x);
    let ey = cell_edges(&raster.y);
    for j in 0..raster.y.len() {
        for i in 0..raster.x.len() {
            let fill = cell_fill(raster.cell(i, j));
            c.rect(ex[i], ey[j], ex[i + 1], ey[j + 1], &format!(r#"fill="{fill}" stroke="none" shape-rendering="crispEdges""#));
        }
    }
}

fn draw_marks(c: &mut Canvas, marks: &[[f64; 2]]) {
    for m in marks {
        let (x, y) = (c.px(m[0]), c.py(m[1]));
        writeln!(c.out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#000" stroke="white"/>"##).unwrap();
    }
}

fn axis_label(id: &str) -> String {
    format!("node {id} withdrawal (kg/s)")
}

/// Renders regions, an optional raster and marked points.
///
/// With two unit nodes per region (or no regions and a raster) the picture
/// is a plane; otherwise every region becomes a set of per-node bars and the
/// raster and marks are ignored.
pub fn render(layers: &[Layer<'_>], raster: Option<&Raster>, marks: &[[f64; 2]]) -> String {
    let planar = layers.iter().all(|l| l.region.nodes.len() == 2);
    if planar && (!layers.is_empty() || raster.is_some()) {
        render_plane(layers, raster, marks)
    } else {
        render_bars(layers)
    }
}

fn render_plane(layers: &[Layer<'_>], raster: Option<&Raster>, marks: &[[f64; 2]]) -> String {
    let (mut xs, mut ys) = (Span::empty(), Span::empty());
    for l in layers {
        xs.add(l.region.nodes[0].lo);
        xs.add(l.region.nodes[0].hi);
        ys.add(l.region.nodes[1].lo);
        ys.add(l.region.nodes[1].hi);
    }
    if let Some(r) = raster {
        for e in cell_edges(&r.x) {
            xs.add(e);
        }
        for e in cell_edges(&r.y) {
            ys.add(e);
        }
    }
    for m in marks {
        xs.add(m[0]);
        ys.add(m[1]);
    }
    let mut c = Canvas::new(xs.padded(), ys.padded());
    let mut legend = Vec::new();
    if let Some(r) = raster {
        draw_raster(&mut c, r);
        legend.push(("secure cell".to_string(), format!(r#"fill="{}""#, cell_fill(CellState::Secure))));
        legend.push(("insecure cell".to_string(), format!(r#"fill="{}""#, cell_fill(CellState::Insecure))));
        if r.count(CellState::Diverged) > 0 {
            legend.push(("diverged cell".to_string(), format!(r#"fill="{}""#, cell_fill(CellState::Diverged))));
        }
    }
    for (l, color) in layers.iter().zip(layer_colors(layers)) {
        let n = &l.region.nodes;
        let style = format!(r#"fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2""#);
        c.rect(n[0].lo, n[1].lo, n[0].hi, n[1].hi, &style);
        legend.push((l.label.clone(), style));
    }
    draw_marks(&mut c, marks);
    if !marks.is_empty() {
        legend.push(("boundary point".to_string(), r##"fill="#000""##.to_string()));
    }
    let (xl, yl) = match (layers.first(), raster) {
        (Some(l), _) => (axis_label(&l.region.nodes[0].id), axis_label(&l.region.nodes[1].id)),
        (None, Some(r)) => (format!("{} (kg/s)", r.labels[0]), format!("{} (kg/s)", r.labels[1])),
        (None, None) => unreachable!("plane needs a region or a raster"),
    };
    c.frame(&xl, Some(&yl), true);
    c.legend(&legend);
    c.finish()
}

fn render_bars(layers: &[Layer<'_>]) -> String {
    let mut ids: Vec<String> = Vec::new();
    let mut xs = Span::empty();
    for l in layers {
        for n in &l.region.nodes {
            if !ids.contains(&n.id) {
                ids.push(n.id.clone());
            }
            xs.add(n.lo);
            xs.add(n.hi);
        }
    }
    let rows = ids.len().max(1) as f64;
    let mut c = Canvas::new(xs.padded(), Span { lo: 0.0, hi: rows });
    let band = (HEIGHT - TOP - BOTTOM) / rows;
    let per = layers.len().max(1) as f64;
    let colors = layer_colors(layers);
    for (r, id) in ids.iter().enumerate() {
        let top = TOP + band * r as f64;
        c.text(LEFT - 8.0, top + band / 2.0 + 4.0, "end", "", &format!("node {id}"));
        for (k, (l, color)) in layers.iter().zip(&colors).enumerate() {
            if let Some(n) = l.region.nodes.iter().find(|n| &n.id == id) {
                let h = (band * 0.7 / per).min(18.0);
                let y = top + band * 0.15 + h * k as f64;
                let (a, b) = (c.px(n.lo), c.px(n.hi));
                writeln!(c.out, r#"<rect x="{a:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{color}" fill-opacity="0.6" stroke="{color}"/>"#, (b - a).max(1.0)).unwrap();
            }
        }
    }
    c.frame("withdrawal (kg/s)", None, false);
    let legend: Vec<(String, String)> = layers
        .iter()
        .zip(&colors)
        .map(|(l, color)| (l.label.clone(), format!(r#"fill="{color}" fill-opacity="0.6""#)))
        .collect();
    c.legend(&legend);
    c.finish()
}
