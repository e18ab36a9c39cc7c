//! Run artifacts: CSV tables, the JSON manifest and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

/// A numeric table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Floats in `{:.16e}`, enough digits to round-trip every `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One named check with its measured value and the tolerance it is held to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Invariant {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Invariant {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// Fixed numerical conventions, recorded so a manifest is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conventions {
    pub lattice_delta: &'static str,
    pub site_coordinates: &'static str,
    pub node_epsilon_ratio: f64,
    pub node_shrink_factor: f64,
    pub ks_coefficient: f64,
    pub rk4_stability_limit: f64,
    pub momentum_warning: f64,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            lattice_delta: "delta_ij / dx^d",
            site_coordinates: "x_i = -L/2 + i dx, row-major with axis 0 slowest",
            node_epsilon_ratio: crate::guidance::NODE_EPSILON_RATIO,
            node_shrink_factor: crate::guidance::SHRINK_FACTOR,
            ks_coefficient: crate::ensemble::KS_99,
            rk4_stability_limit: crate::flow::RK4_STABILITY_LIMIT,
            momentum_warning: crate::flow::MOMENTUM_WARNING,
        }
    }
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub tables: Vec<(String, Table)>,
    pub plots: Vec<(String, String)>,
    pub invariants: Vec<Invariant>,
    pub constraint_maxima: BTreeMap<String, f64>,
    pub report: Option<serde_json::Value>,
    pub notes: Vec<String>,
}

impl RunOutput {
    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|(f, _)| f == file).map(|(_, t)| t)
    }

    pub fn invariant(&self, name: &str) -> Option<&Invariant> {
        self.invariants.iter().find(|i| i.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.invariants.iter().all(|i| i.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
    pub status: &'static str,
    pub error: Option<String>,
    pub seed: u64,
    pub scenario: Scenario,
    pub conventions: Conventions,
    pub invariants: Vec<Invariant>,
    pub constraint_maxima: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub report: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, scenario: &Scenario) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            status: "ok",
            error: None,
            seed: scenario.seed,
            scenario: scenario.clone(),
            conventions: Conventions::default(),
            invariants: Vec::new(),
            constraint_maxima: BTreeMap::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            report: None,
        }
    }

    pub fn fail(&mut self, status: &'static str, error: &Error) {
        self.status = status;
        self.error = Some(error.to_string());
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Writes the tables, plots and an optional JSON report of `output` into
/// `dir`, then the manifest. Returns the manifest path.
pub fn emit_outputs(dir: &Path, mut manifest: Manifest, output: Option<&RunOutput>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    if let Some(out) = output {
        for (name, table) in &out.tables {
            write(dir, name, &table.to_csv())?;
            manifest.outputs.push(name.clone());
        }
        for (name, svg) in &out.plots {
            write(dir, name, svg)?;
            manifest.outputs.push(name.clone());
        }
        if let Some(report) = &out.report {
            let name = format!("{}.json", manifest.command);
            write(dir, &name, &serde_json::to_string_pretty(report)?)?;
            manifest.outputs.push(name);
        }
        manifest.invariants = out.invariants.clone();
        manifest.constraint_maxima = out.constraint_maxima.clone();
        manifest.report = out.report.clone();
        manifest.notes = out.notes.clone();
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write(dir, MANIFEST_FILE, &text)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn frame(svg: &mut String, title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) {
    let _ = write!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>
<rect x="{MARGIN}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>
<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>
<text x="{MARGIN}" y="{:.1}" text-anchor="start">{:.3e}</text>
<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3e}</text>
<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3e}</text>
<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3e}</text>
"##,
        WIDTH / 2.0,
        escape(title),
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel),
        HEIGHT - MARGIN + 16.0,
        x.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        x.1,
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        y.0,
        MARGIN - 4.0,
        MARGIN + 10.0,
        y.1,
    );
}

/// One series of a line plot.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let xr = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let yr = range(series.iter().flat_map(|s| s.y.iter().copied()));
    let px = |v: f64| MARGIN + (v - xr.0) / (xr.1 - xr.0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - yr.0) / (yr.1 - yr.0) * (HEIGHT - 2.0 * MARGIN);
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, xr, yr);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            points.join(" ")
        );
        if series.len() > 1 && series.len() <= 8 {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
                WIDTH - MARGIN - 100.0,
                MARGIN + 16.0 + 14.0 * k as f64,
                escape(s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heat map of `values[row][col]`, rows drawn bottom to top.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64), values: &[Vec<f64>]) -> String {
    let (lo, hi) = range(values.iter().flatten().copied());
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, x, y);
    let rows = values.len().max(1);
    let h = (HEIGHT - 2.0 * MARGIN) / rows as f64;
    for (r, row) in values.iter().enumerate() {
        let w = (WIDTH - 2.0 * MARGIN) / row.len().max(1) as f64;
        for (c, &v) in row.iter().enumerate() {
            let s = if v.is_finite() { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
            // white to dark blue
            let red = (255.0 * (1.0 - s)) as u8;
            let green = (255.0 * (1.0 - 0.8 * s)) as u8;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({red},{green},255)"/>"#,
                MARGIN + c as f64 * w,
                HEIGHT - MARGIN - (r + 1) as f64 * h,
                w + 0.05,
                h + 0.05,
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
