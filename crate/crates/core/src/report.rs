//! Run artifacts: a versioned JSON summary, CSV tables and SVG plots.
//!
//! Everything written here is a pure function of the run results, so the
//! same configuration produces byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::checks::Check;
use crate::error::{BlabError, Result};

pub const SCHEMA: &str = "blab.summary/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Everything a command produces.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: String,
    /// assertions that decide the exit status
    pub checks: Vec<Check>,
    /// recorded alongside, never decide the exit status
    pub info: Vec<Check>,
    pub sections: serde_json::Map<String, serde_json::Value>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
}

impl Outcome {
    pub fn new(command: &str) -> Self {
        Outcome {
            command: command.into(),
            checks: Vec::new(),
            info: Vec::new(),
            sections: serde_json::Map::new(),
            tables: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn section<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.sections.insert(name.into(), v);
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize> {
    schema: &'static str,
    version: &'static str,
    command: &'a str,
    pass: bool,
    config: &'a C,
    seed: u64,
    checks: &'a [Check],
    info: &'a [Check],
    tables: Vec<&'a str>,
    plots: Vec<&'a str>,
    results: &'a serde_json::Map<String, serde_json::Value>,
}

pub fn summary_json<C: Serialize>(outcome: &Outcome, config: &C, seed: u64) -> Result<String> {
    let s = Summary {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command: &outcome.command,
        pass: outcome.pass(),
        config,
        seed,
        checks: &outcome.checks,
        info: &outcome.info,
        tables: outcome.tables.iter().map(|t| t.name.as_str()).collect(),
        plots: outcome.plots.iter().map(|p| p.name.as_str()).collect(),
        results: &outcome.sections,
    };
    let mut text = serde_json::to_string_pretty(&s).map_err(|e| BlabError::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn table_csv(t: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.columns).map_err(|e| BlabError::Io(e.to_string()))?;
    for r in &t.rows {
        w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(|e| BlabError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| BlabError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| BlabError::Io(e.to_string()))
}

/// Write summary.json, <table>.csv and <plot>.svg into `dir`.
pub fn write_all<C: Serialize>(dir: &Path, outcome: &Outcome, config: &C, seed: u64) -> Result<()> {
    let io = |p: &Path, e: std::io::Error| BlabError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join("summary.json");
    std::fs::write(&path, summary_json(outcome, config, seed)?).map_err(|e| io(&path, e))?;
    for t in &outcome.tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, table_csv(t)?).map_err(|e| io(&path, e))?;
    }
    for p in &outcome.plots {
        let path = dir.join(format!("{}.svg", p.name));
        std::fs::write(&path, render_svg(p)).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 80.0;
const MR: f64 = 150.0;
const MT: f64 = 40.0;
const MB: f64 = 60.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            let v = if log { v.abs() } else { v };
            if !v.is_finite() || (log && v <= 0.0) {
                continue;
            }
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v.abs() > 0.0 {
                v.abs().log10()
            } else {
                return None;
            }
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let a = self.lo.ceil() as i32;
            let b = self.hi.floor() as i32;
            let step = ((b - a) / 6).max(1);
            (a..=b).step_by(step as usize).map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}"))).collect()
        } else {
            let span = self.hi - self.lo;
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|s| s * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
            let mut v = (self.lo / step).ceil() * step;
            let mut out = Vec::new();
            while v <= self.hi {
                out.push(((v - self.lo) / span, format!("{:.3}", v)));
                v += step;
            }
            out
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(p: &Plot) -> String {
    let xs = Axis::new(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0)), p.log_x);
    let ys = Axis::new(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.1)), p.log_y);
    let pw = W - ML - MR;
    let ph = H - MT - MB;
    let px = |f: f64| ML + f * pw;
    let py = |f: f64| MT + (1.0 - f) * ph;
    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, ML + pw / 2.0, esc(&p.title));
    let _ = writeln!(o, r#"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (f, label) in xs.ticks() {
        let x = px(f);
        let _ = writeln!(o, r##"<line x1="{x:.2}" y1="{MT}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, MT + ph);
        let _ = writeln!(o, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, MT + ph + 16.0);
    }
    for (f, label) in ys.ticks() {
        let y = py(f);
        let _ = writeln!(o, r##"<line x1="{ML}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, ML + pw);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, ML - 6.0, y + 4.0);
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ML + pw / 2.0,
        H - 16.0,
        esc(&p.x_label)
    );
    let _ = writeln!(
        o,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        MT + ph / 2.0,
        MT + ph / 2.0,
        esc(&p.y_label)
    );
    for (k, s) in p.series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|&(x, y)| Some((px(xs.frac(x)?), py(ys.frac(y)?))))
            .collect();
        if pts.len() > 1 {
            let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(o, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, d.join(" "));
        }
        if pts.len() <= 60 {
            for (x, y) in &pts {
                let _ = writeln!(o, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{c}"/>"#);
            }
        }
        let ly = MT + 14.0 + 16.0 * k as f64;
        let lx = ML + pw + 10.0;
        let _ = writeln!(o, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(o, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, esc(&s.label));
    }
    o.push_str("</svg>\n");
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new("t", &["eps", "value"]);
        t.push(vec![0.5, 1.0]);
        let s = table_csv(&t).unwrap();
        assert_eq!(s, "eps,value\n5e-1,1e0\n");
    }

    #[test]
    fn svg_is_well_formed_for_degenerate_data() {
        let p = Plot {
            name: "p".into(),
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            log_y: false,
            series: vec![Series {
                label: "s".into(),
                points: vec![(1.0, 2.0)],
            }],
        };
        let s = render_svg(&p);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
    }
}
