//! CSV tables and plot scripts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// An in-memory table. Cells are already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub plot: Option<PlotSpec>,
}

/// How to draw a table: `y` against `x`, one line per distinct `series`
/// tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: &'static str,
    pub y: &'static str,
    pub series: Vec<&'static str>,
    pub log_y: bool,
    pub x_label: &'static str,
    pub y_label: &'static str,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Self { name: name.into(), header, rows: Vec::new(), plot: None }
    }

    pub fn with_plot(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Writes `# `-prefixed `echo` lines, one header line, then the rows.
    pub fn write(&self, dir: &Path, echo: &str) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        for line in echo.lines() {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Locale-independent shortest round-trip form; missing values are empty.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".write_test");
    File::create(&probe).with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// A matplotlib script that draws every table with a plot spec.
pub fn plot_script(tables: &[Table]) -> Option<String> {
    let mut body = String::new();
    for t in tables {
        let Some(p) = &t.plot else { continue };
        let series = p.series.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ");
        body.push_str(&format!(
            "plot({:?}, {:?}, {:?}, [{series}], {}, {:?}, {:?})\n",
            t.file_name(),
            p.x,
            p.y,
            if p.log_y { "True" } else { "False" },
            p.x_label,
            p.y_label,
        ));
    }
    if body.is_empty() {
        return None;
    }
    Some(format!("{PLOT_PRELUDE}\n{body}"))
}

const PLOT_PRELUDE: &str = r##"#!/usr/bin/env python3
# Generated by relaysched. Run from the output directory.
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot(path, x, y, series, log_y, x_label, y_label):
    with open(path) as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    lines = defaultdict(list)
    for r in rows:
        if r[y] == "":
            continue
        lines[tuple(r[s] for s in series)].append((float(r[x]), float(r[y])))
    fig, ax = plt.subplots()
    for key, pts in sorted(lines.items()):
        pts.sort()
        style = "o" if "sim" in key else "-"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], style, label=" ".join(key))
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    fig.savefig(path.replace(".csv", ".png"), dpi=150)
"##;
