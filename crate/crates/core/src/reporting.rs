//! Summary tables, curve files and SVG plots.
//!
//! Every emitted body is a pure function of its inputs: no timestamps, no
//! locale-dependent formatting.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crowdstats::{find_optimal, AccuracyCurve, CurveMeta, CurvePoint, OptimalSubsetResult, StatsError};

pub const SUMMARY_HEADER: [&str; 4] = ["Data", "Optimal Subset Size", "Accuracy (%)", "Size"];
pub const CURVE_HEADER: &str = "k,accuracy,stderr,trials,exhaustive";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report")]
    EmptyInput,
    #[error("curve has no points")]
    EmptyCurve,
    #[error("invalid summary row: {0}")]
    InvalidRow(String),
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for ReportError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => ReportError::Io(io),
            other => ReportError::Parse {
                path: "<csv>".into(),
                reason: format!("{other:?}"),
            },
        }
    }
}

/// One line of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub data_label: String,
    pub optimal_subset_size: usize,
    pub accuracy_pct: f64,
    /// Free text, conventionally `"<n> roles"`.
    pub population: String,
}

impl SummaryRow {
    pub fn new(data_label: &str, optimal_subset_size: usize, accuracy_pct: f64, population: &str) -> Self {
        Self {
            data_label: data_label.to_string(),
            optimal_subset_size,
            accuracy_pct,
            population: population.to_string(),
        }
    }

    /// Row for a swept curve: k*, accuracy at k* in percent, and `roles`
    /// prompted.
    pub fn from_optimal(data_label: &str, optimal: &OptimalSubsetResult, roles: usize) -> Self {
        Self::new(
            data_label,
            optimal.k_star,
            100.0 * optimal.accuracy_at_k_star,
            &format!("{roles} roles"),
        )
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if !(0.0..=100.0).contains(&self.accuracy_pct) {
            return Err(ReportError::InvalidRow(format!(
                "{}: accuracy {} outside 0..=100",
                self.data_label, self.accuracy_pct
            )));
        }
        Ok(())
    }

    fn cells(&self) -> [String; 4] {
        [
            self.data_label.clone(),
            self.optimal_subset_size.to_string(),
            format!("{:.2}", self.accuracy_pct),
            self.population.clone(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            _ => Err(format!("unknown format {s:?} (md, csv)")),
        }
    }
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

/// Header plus one line per row, in input order.
pub fn summary_table(rows: &[SummaryRow], format: TableFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    for r in rows {
        r.validate()?;
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv_writer(Vec::new());
            w.write_record(SUMMARY_HEADER)?;
            for r in rows {
                w.write_record(r.cells())?;
            }
            let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        TableFormat::Markdown => {
            let cells: Vec<[String; 4]> = rows
                .iter()
                .map(|r| r.cells().map(|c| c.replace('|', "\\|")))
                .collect();
            let head = SUMMARY_HEADER.map(str::to_string);
            Ok(markdown_table(&head, &cells, &[false, true, true, false]))
        }
    }
}

/// Column-aligned Markdown table; `right[i]` right-aligns column `i`.
fn markdown_table<const N: usize>(head: &[String; N], rows: &[[String; N]], right: &[bool; N]) -> String {
    let mut widths = head.clone().map(|h| h.chars().count().max(3));
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String; N]| {
        let mut s = String::from("|");
        for i in 0..N {
            let pad = widths[i] - cells[i].chars().count();
            if right[i] {
                write!(s, " {}{} |", " ".repeat(pad), cells[i]).unwrap();
            } else {
                write!(s, " {}{} |", cells[i], " ".repeat(pad)).unwrap();
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(head);
    out.push('|');
    for i in 0..N {
        let dashes = "-".repeat(widths[i] - 1);
        if right[i] {
            write!(out, " {dashes}: |").unwrap();
        } else {
            write!(out, " {dashes}- |").unwrap();
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    k: usize,
    accuracy: f64,
    stderr: f64,
    trials: u64,
    exhaustive: bool,
}

/// Writes `k,accuracy,stderr,trials,exhaustive` rows. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], sink: W) -> Result<(), ReportError> {
    let mut w = csv_writer(sink);
    for p in points {
        w.serialize(CurveRow {
            k: p.k,
            accuracy: p.accuracy,
            stderr: p.stderr,
            trials: p.trials,
            exhaustive: p.exhaustive,
        })?;
    }
    if points.is_empty() {
        w.write_record(CURVE_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(source: R) -> Result<Vec<CurvePoint>, ReportError> {
    let mut r = csv::Reader::from_reader(source);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CURVE_HEADER {
        return Err(ReportError::Parse {
            path: "<csv>".into(),
            reason: format!("expected header {CURVE_HEADER:?}, found {:?}", header.join(",")),
        });
    }
    r.deserialize::<CurveRow>()
        .map(|row| {
            let row = row?;
            Ok(CurvePoint {
                k: row.k,
                accuracy: row.accuracy,
                stderr: row.stderr,
                trials: row.trials,
                exhaustive: row.exhaustive,
            })
        })
        .collect()
}

/// A curve with the labels a report needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCurve {
    pub label: String,
    /// Number of prompts behind the curve, usable or not.
    pub roles: usize,
    pub epsilon: f64,
    pub curve: AccuracyCurve,
}

impl LabeledCurve {
    pub fn optimal(&self) -> Result<OptimalSubsetResult, ReportError> {
        Ok(find_optimal(&self.curve, self.epsilon)?)
    }

    pub fn summary_row(&self) -> Result<SummaryRow, ReportError> {
        Ok(SummaryRow::from_optimal(&self.label, &self.optimal()?, self.roles))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    label: String,
    roles: usize,
    epsilon: f64,
    meta: CurveMeta,
}

/// `curve.csv` -> `curve.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the curve CSV and its JSON sidecar.
pub fn save_curve(csv_path: &Path, curve: &LabeledCurve) -> Result<(), ReportError> {
    let mut body = Vec::new();
    write_curve_csv(&curve.curve.points, &mut body)?;
    fs::write(csv_path, body)?;
    let sidecar = Sidecar {
        label: curve.label.clone(),
        roles: curve.roles,
        epsilon: curve.epsilon,
        meta: curve.curve.meta.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    fs::write(sidecar_path(csv_path), json)?;
    Ok(())
}

pub fn load_curve(csv_path: &Path) -> Result<LabeledCurve, ReportError> {
    let at = |e: ReportError| match e {
        ReportError::Parse { reason, .. } => ReportError::Parse {
            path: csv_path.display().to_string(),
            reason,
        },
        other => other,
    };
    let points = read_curve_csv(fs::File::open(csv_path)?).map_err(at)?;
    let side = sidecar_path(csv_path);
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&side)?).map_err(|e| ReportError::Parse {
        path: side.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(LabeledCurve {
        label: sidecar.label,
        roles: sidecar.roles,
        epsilon: sidecar.epsilon,
        curve: AccuracyCurve {
            points,
            meta: sidecar.meta,
        },
    })
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 90.0;

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Standalone SVG: subset size on x (from 0 to the largest k), accuracy in
/// 0..=1 on y, a polyline through the points (when there are two or more),
/// a dot per point, a dashed vertical marker at `k_star`, and a footer with
/// the sampling settings.
pub fn render_curve_svg(curve: &AccuracyCurve, title: &str, k_star: Option<usize>) -> Result<String, ReportError> {
    if curve.points.is_empty() {
        return Err(ReportError::EmptyCurve);
    }
    let mut points = curve.points.clone();
    points.sort_by_key(|p| p.k);
    let max_k = points.last().map(|p| p.k).unwrap_or(1).max(k_star.unwrap_or(0)).max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |k: usize| LEFT + plot_w * k as f64 / max_k as f64;
    let y = |a: f64| TOP + plot_h * (1.0 - a.clamp(0.0, 1.0));
    let x_axis = TOP + plot_h;

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
    )
    .unwrap();
    writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>").unwrap();
    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"30.00\" font-size=\"18\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape_xml(title)
    )
    .unwrap();

    s.push_str("<g class=\"axes\" stroke=\"#000000\" stroke-width=\"1\">\n");
    writeln!(s, "<line x1=\"{LEFT:.2}\" y1=\"{x_axis:.2}\" x2=\"{:.2}\" y2=\"{x_axis:.2}\"/>", WIDTH - RIGHT).unwrap();
    writeln!(s, "<line x1=\"{LEFT:.2}\" y1=\"{TOP:.2}\" x2=\"{LEFT:.2}\" y2=\"{x_axis:.2}\"/>").unwrap();
    s.push_str("</g>\n");

    s.push_str("<g class=\"ticks\" font-size=\"12\">\n");
    for i in 0..=4 {
        let a = i as f64 / 4.0;
        let ty = y(a);
        writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{ty:.2}\" x2=\"{LEFT:.2}\" y2=\"{ty:.2}\" stroke=\"#000000\"/>",
            LEFT - 5.0
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{a:.2}</text>",
            LEFT - 8.0,
            ty + 4.0
        )
        .unwrap();
    }
    let mut x_ticks: Vec<usize> = (0..=4).map(|i| (max_k * i + 2) / 4).collect();
    x_ticks.dedup();
    for k in x_ticks {
        let tx = x(k);
        writeln!(
            s,
            "<line x1=\"{tx:.2}\" y1=\"{x_axis:.2}\" x2=\"{tx:.2}\" y2=\"{:.2}\" stroke=\"#000000\"/>",
            x_axis + 5.0
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{tx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{k}</text>",
            x_axis + 20.0
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">Subset size</text>",
        LEFT + plot_w / 2.0,
        x_axis + 42.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"20.00\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20.00 {:.2})\">Accuracy</text>",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    if points.len() > 1 {
        let coords: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.k), y(p.accuracy)))
            .collect();
        writeln!(
            s,
            "<polyline class=\"curve\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>",
            coords.join(" ")
        )
        .unwrap();
    }
    s.push_str("<g class=\"points\" fill=\"#1f77b4\">\n");
    for p in &points {
        writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\"/>", x(p.k), y(p.accuracy)).unwrap();
    }
    s.push_str("</g>\n");

    if let Some(k) = k_star {
        let kx = x(k);
        writeln!(
            s,
            "<line class=\"k-star\" x1=\"{kx:.2}\" y1=\"{TOP:.2}\" x2=\"{kx:.2}\" y2=\"{x_axis:.2}\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>"
        )
        .unwrap();
        writeln!(
            s,
            "<text class=\"k-star-label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#d62728\">k* = {k}</text>",
            kx + 4.0,
            TOP + 14.0
        )
        .unwrap();
    }

    let m = &curve.meta;
    writeln!(
        s,
        "<text class=\"meta\" x=\"{LEFT:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#555555\">aggregator: {}; trials: {}; seed: {}; population: {}; range: [{}, {}]</text>",
        HEIGHT - 12.0,
        escape_xml(&m.aggregator.to_string()),
        m.trials,
        m.seed,
        m.population,
        m.range.lo,
        m.range.hi
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_curve_svg(path: &Path, curve: &AccuracyCurve, title: &str, k_star: Option<usize>) -> Result<(), ReportError> {
    fs::write(path, render_curve_svg(curve, title, k_star)?)?;
    Ok(())
}

/// Markdown table of accuracy deltas (`b - a`) at every shared k, followed
/// by k* and maximum-accuracy rows. Disjoint grids produce only the last two
/// rows and a warning line.
pub fn compare_runs(a: &LabeledCurve, b: &LabeledCurve) -> Result<String, ReportError> {
    if a.curve.points.is_empty() || b.curve.points.is_empty() {
        return Err(ReportError::EmptyCurve);
    }
    let (oa, ob) = (a.optimal()?, b.optimal()?);
    let mut rows = Vec::new();
    for pa in &a.curve.points {
        if let Some(pb) = b.curve.points.iter().find(|p| p.k == pa.k) {
            rows.push([
                pa.k.to_string(),
                format!("{:.4}", pa.accuracy),
                format!("{:.4}", pb.accuracy),
                format!("{:+.4}", pb.accuracy - pa.accuracy),
            ]);
        }
    }
    let shared = rows.len();
    rows.push([
        "k*".to_string(),
        oa.k_star.to_string(),
        ob.k_star.to_string(),
        format!("{:+}", ob.k_star as i64 - oa.k_star as i64),
    ]);
    rows.push([
        "max".to_string(),
        format!("{:.4}", oa.max_accuracy),
        format!("{:.4}", ob.max_accuracy),
        format!("{:+.4}", ob.max_accuracy - oa.max_accuracy),
    ]);
    let head = [
        "k".to_string(),
        a.label.replace('|', "\\|"),
        b.label.replace('|', "\\|"),
        "delta".to_string(),
    ];
    let mut out = String::new();
    if shared == 0 {
        log::warn!("{} and {} share no subset sizes", a.label, b.label);
        writeln!(out, "warning: {} and {} share no subset sizes", a.label, b.label).unwrap();
        out.push('\n');
    }
    out.push_str(&markdown_table(&head, &rows, &[false, true, true, true]));
    Ok(out)
}
