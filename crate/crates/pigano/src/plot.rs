//! SVG charts from the CSV files the other commands write.
//!
//! A table whose first column is numeric becomes a line chart of every other
//! numeric column; otherwise each row is a group of bars. Embedding-distance
//! tables (`set,sample,distance`) become overlaid histograms.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{format_err, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| format_err(path, e.to_string()))?;
        let header = r.headers().map_err(|e| format_err(path, e.to_string()))?.iter().map(String::from).collect::<Vec<_>>();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
            rows.push(rec.iter().map(String::from).collect::<Vec<_>>());
        }
        if header.len() < 2 {
            return Err(format_err(path, "need at least two columns to plot"));
        }
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| format_err(path, e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| format_err(path, e.to_string()))?;
        crate::codec::write_atomic(path, &bytes)
    }

    fn numeric(&self, col: usize) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.get(col)?.parse::<f64>().ok()).collect()
    }
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, allow_log: bool) -> Self {
        let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if v.is_empty() {
            return Self { lo: 0.0, hi: 1.0, log: false };
        }
        let log = allow_log && lo > 0.0 && hi / lo > 100.0;
        if log {
            return Self { lo: lo.log10().floor(), hi: hi.log10().ceil(), log };
        }
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            return (self.lo as i32..=self.hi as i32).map(|e| (10f64.powi(e), format!("1e{e}"))).collect();
        }
        (0..=5)
            .map(|i| {
                let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                (v, format!("{v:.3}"))
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Canvas {
    svg: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
        Self { svg }
    }

    fn px(fx: f64) -> f64 {
        LEFT + fx * (W - LEFT - RIGHT)
    }

    fn py(fy: f64) -> f64 {
        H - BOTTOM - fy * (H - TOP - BOTTOM)
    }

    fn frame(&mut self, y: &Axis, xlabel: &str) {
        let (x0, x1, y0, y1) = (Self::px(0.0), Self::px(1.0), Self::py(0.0), Self::py(1.0));
        let _ = writeln!(self.svg, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
        for (v, label) in y.ticks() {
            let ty = Self::py(y.frac(v));
            let _ = writeln!(self.svg, r##"<line x1="{x0}" y1="{ty}" x2="{x1}" y2="{ty}" stroke="#ddd"/>"##);
            let _ = writeln!(self.svg, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, x0 - 6.0, ty + 4.0);
        }
        let _ = writeln!(self.svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 16.0, escape(xlabel));
    }

    fn legend(&mut self, names: &[&str]) {
        for (i, n) in names.iter().enumerate() {
            let y = TOP + 16.0 + 18.0 * i as f64;
            let x = W - RIGHT + 14.0;
            let _ = writeln!(self.svg, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#, y - 10.0, COLORS[i % COLORS.len()]);
            let _ = writeln!(self.svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(n));
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn line_chart(t: &Table, title: &str, x: &[f64], series: &[(usize, Vec<f64>)]) -> String {
    let mut c = Canvas::new(title);
    let xa = Axis::fit(x.iter().copied(), false);
    let ya = Axis::fit(series.iter().flat_map(|s| s.1.iter().copied()), true);
    c.frame(&ya, &t.header[0]);
    for (label, v) in [(format!("{:.4}", xa.lo), 0.0), (format!("{:.4}", xa.hi), 1.0)] {
        let _ = writeln!(c.svg, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, Canvas::px(v), H - BOTTOM + 16.0);
    }
    for (i, (_, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| format!("{:.2},{:.2}", Canvas::px(xa.frac(*a)), Canvas::py(ya.frac(*b))))
            .collect();
        let _ = writeln!(c.svg, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, COLORS[i % COLORS.len()], pts.join(" "));
    }
    let names: Vec<&str> = series.iter().map(|s| t.header[s.0].as_str()).collect();
    c.legend(&names);
    c.finish()
}

fn bar_chart(t: &Table, title: &str, series: &[(usize, Vec<f64>)]) -> String {
    let mut c = Canvas::new(title);
    let ya = Axis::fit(series.iter().flat_map(|s| s.1.iter().copied()).chain(std::iter::once(0.0)), false);
    c.frame(&ya, &t.header[0]);
    let groups = t.rows.len().max(1) as f64;
    let slot = 1.0 / groups;
    let bar = slot * 0.8 / series.len().max(1) as f64;
    let zero = Canvas::py(ya.frac(0.0));
    for (g, row) in t.rows.iter().enumerate() {
        for (i, (_, ys)) in series.iter().enumerate() {
            let fx = slot * g as f64 + slot * 0.1 + bar * i as f64;
            let top = Canvas::py(ya.frac(ys[g]));
            let (y, h) = if top < zero { (top, zero - top) } else { (zero, top - zero) };
            let _ = writeln!(
                c.svg,
                r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
                Canvas::px(fx),
                Canvas::px(bar) - LEFT,
                COLORS[i % COLORS.len()]
            );
        }
        if t.rows.len() <= 40 {
            let _ = writeln!(c.svg, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, Canvas::px(slot * (g as f64 + 0.5)), H - BOTTOM + 16.0, escape(&row[0]));
        }
    }
    let names: Vec<&str> = series.iter().map(|s| t.header[s.0].as_str()).collect();
    c.legend(&names);
    c.finish()
}

fn histogram(t: &Table, title: &str, values: &[f64]) -> String {
    let sets: Vec<String> = {
        let mut s: Vec<String> = t.rows.iter().map(|r| r[0].clone()).collect();
        s.dedup();
        s
    };
    let bins = 20;
    let xa = Axis::fit(values.iter().copied(), false);
    let counts: Vec<Vec<f64>> = sets
        .iter()
        .map(|set| {
            let mut c = vec![0.0; bins];
            for (r, v) in t.rows.iter().zip(values) {
                if &r[0] == set {
                    let b = ((xa.frac(*v) * bins as f64) as usize).min(bins - 1);
                    c[b] += 1.0;
                }
            }
            c
        })
        .collect();
    let ya = Axis::fit(counts.iter().flatten().copied().chain(std::iter::once(0.0)), false);
    let mut c = Canvas::new(title);
    c.frame(&ya, &t.header[2]);
    for (label, v) in [(format!("{:.4}", xa.lo), 0.0), (format!("{:.4}", xa.hi), 1.0)] {
        let _ = writeln!(c.svg, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, Canvas::px(v), H - BOTTOM + 16.0);
    }
    for (i, cs) in counts.iter().enumerate() {
        for (b, n) in cs.iter().enumerate() {
            let x0 = Canvas::px(b as f64 / bins as f64);
            let x1 = Canvas::px((b + 1) as f64 / bins as f64);
            let top = Canvas::py(ya.frac(*n));
            let _ = writeln!(
                c.svg,
                r#"<rect x="{x0:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5"/>"#,
                x1 - x0,
                Canvas::py(0.0) - top,
                COLORS[i % COLORS.len()]
            );
        }
    }
    let names: Vec<&str> = sets.iter().map(String::as_str).collect();
    c.legend(&names);
    c.finish()
}

/// Renders `t` as SVG.
pub fn render(t: &Table, title: &str) -> Result<String> {
    if t.rows.is_empty() {
        return Err(Error::Invalid(format!("{title}: no rows to plot")));
    }
    if t.header == ["set", "sample", "distance"] {
        let v = t.numeric(2).ok_or_else(|| Error::Invalid(format!("{title}: non-numeric distances")))?;
        return Ok(histogram(t, title, &v));
    }
    let series: Vec<(usize, Vec<f64>)> = (1..t.header.len()).filter_map(|c| t.numeric(c).map(|v| (c, v))).collect();
    if series.is_empty() {
        return Err(Error::Invalid(format!("{title}: no numeric columns")));
    }
    Ok(match t.numeric(0) {
        Some(x) => line_chart(t, title, &x, &series),
        None => bar_chart(t, title, &series),
    })
}

/// Writes `<stem>_plot.svg` and `<stem>_plot.csv` for `input` into `out`.
pub fn plot_file(input: &Path, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let t = Table::read(input)?;
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| format_err(input, "file name is not valid UTF-8"))?;
    std::fs::create_dir_all(out).map_err(crate::error::io_err(out))?;
    let svg_path = out.join(format!("{stem}_plot.svg"));
    let csv_path = out.join(format!("{stem}_plot.csv"));
    crate::codec::write_atomic(&svg_path, render(&t, stem)?.as_bytes())?;
    t.write(&csv_path)?;
    Ok((svg_path, csv_path))
}
