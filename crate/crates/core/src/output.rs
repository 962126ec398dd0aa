//! CSV, JSON-lines and SVG emitters.
//!
//! Floats in CSV are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64`. JSON uses the shortest representation that
//! round-trips. Nothing here depends on wall-clock time or thread count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sweep::SweepRecord;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("json on line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub const CURVE_HEADER: [&str; 11] =
    ["a", "s", "F", "F_minus", "F_plus", "n_unruh", "alpha", "beta", "det_sigma", "det_sigma_s", "converged"];

/// One row of the fidelity-curve CSV. Missing values are empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub a: f64,
    pub s: f64,
    pub fidelity: Option<f64>,
    pub f_minus: Option<f64>,
    pub f_plus: Option<f64>,
    pub n_unruh: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub det_sigma: Option<f64>,
    pub det_sigma_s: Option<f64>,
    pub converged: bool,
}

impl CurveRow {
    pub fn from_record(r: &SweepRecord) -> Self {
        Self {
            a: r.a,
            s: r.s,
            fidelity: r.result.map(|d| d.fidelity),
            f_minus: r.result.map(|d| d.f_minus),
            f_plus: r.result.map(|d| d.f_plus),
            n_unruh: r.overlaps.as_ref().map(|o| o.n_unruh),
            alpha: r.overlaps.as_ref().map(|o| o.alpha.re),
            beta: r.overlaps.as_ref().map(|o| o.beta.re),
            det_sigma: r.sigma.map(|m| m.det()),
            det_sigma_s: r.sigma_s.map(|m| m.det()),
            converged: r.converged,
        }
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn cell(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = CURVE_HEADER.join(",");
    out.push('\n');
    for r in rows {
        let fields = [
            format_float(r.a),
            format_float(r.s),
            cell(r.fidelity),
            cell(r.f_minus),
            cell(r.f_plus),
            cell(r.n_unruh),
            cell(r.alpha),
            cell(r.beta),
            cell(r.det_sigma),
            cell(r.det_sigma_s),
            r.converged.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>, OutputError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, message: String| OutputError::Parse { line: line + 1, message };
    match lines.next() {
        Some((_, h)) if h == CURVE_HEADER.join(",") => {}
        Some((i, h)) => return Err(err(i, format!("unexpected header {h:?}"))),
        None => return Err(err(0, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CURVE_HEADER.len() {
            return Err(err(i, format!("expected {} fields, found {}", CURVE_HEADER.len(), f.len())));
        }
        let num = |j: usize| -> Result<Option<f64>, OutputError> {
            if f[j].is_empty() {
                Ok(None)
            } else {
                f[j].parse::<f64>().map(Some).map_err(|e| err(i, format!("{}: {e}", CURVE_HEADER[j])))
            }
        };
        let required = |j: usize| num(j)?.ok_or_else(|| err(i, format!("{} is required", CURVE_HEADER[j])));
        rows.push(CurveRow {
            a: required(0)?,
            s: required(1)?,
            fidelity: num(2)?,
            f_minus: num(3)?,
            f_plus: num(4)?,
            n_unruh: num(5)?,
            alpha: num(6)?,
            beta: num(7)?,
            det_sigma: num(8)?,
            det_sigma_s: num(9)?,
            converged: f[10].parse().map_err(|e| err(i, format!("converged: {e}")))?,
        });
    }
    Ok(rows)
}

pub fn record_line(r: &SweepRecord) -> String {
    serde_json::to_string(r).expect("sweep records serialise")
}

pub fn records_jsonl(records: &[SweepRecord]) -> String {
    records.iter().map(|r| record_line(r) + "\n").collect()
}

pub fn parse_records_jsonl(text: &str) -> Result<Vec<SweepRecord>, OutputError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| OutputError::Json { line: i + 1, source }))
        .collect()
}

/// A polyline; `None` points break the line and mark a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, Option<f64>)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub y_range: (f64, f64),
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot on a logarithmic x axis, SVG 1.1.
pub fn log_x_plot(spec: &PlotSpec, series: &[Series]) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(|x| *x > 0.0).collect();
    let (x_lo, x_hi) = if xs.is_empty() {
        (1.0, 10.0)
    } else {
        (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(0.0, f64::max))
    };
    let dec_lo = x_lo.log10().floor();
    let dec_hi = x_hi.log10().ceil().max(dec_lo + 1.0);
    let (y_lo, y_hi) = spec.y_range;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x.log10() - dec_lo) / (dec_hi - dec_lo) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y.clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut o = String::new();
    let _ = writeln!(o, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, esc(&spec.title));
    let _ = writeln!(
        o,
        r#"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let decades = (dec_hi - dec_lo) as i32;
    for d in 0..=decades {
        let e = dec_lo as i32 + d;
        let x = px(10f64.powi(e));
        let _ = writeln!(o, r##"<line x1="{x:.2}" y1="{MARGIN_TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##, MARGIN_TOP + plot_h);
        let _ = writeln!(o, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#, MARGIN_TOP + plot_h + 18.0);
        if d < decades {
            for m in 2..10 {
                let xm = px(m as f64 * 10f64.powi(e));
                let _ = writeln!(o, r#"<line x1="{xm:.2}" y1="{:.2}" x2="{xm:.2}" y2="{:.2}" stroke="black"/>"#, MARGIN_TOP + plot_h, MARGIN_TOP + plot_h - 4.0);
            }
        }
    }
    for i in 0..=5 {
        let y = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        let yy = py(y);
        let _ = writeln!(o, r##"<line x1="{MARGIN_LEFT:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##, MARGIN_LEFT + plot_w);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y:.2}</text>"#, MARGIN_LEFT - 6.0, yy + 4.0);
    }
    let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 12.0, esc(&spec.x_label));
    let _ = writeln!(
        o,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        esc(&spec.y_label)
    );

    let mut gaps: Vec<f64> = Vec::new();
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, o: &mut String| {
            if run.len() > 1 {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(o, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} points="{}"/>"#, pts.join(" "));
            } else if let Some((x, y)) = run.first() {
                let _ = writeln!(o, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{colour}"/>"#);
            }
            run.clear();
        };
        for &(x, y) in &s.points {
            match y {
                Some(y) if x > 0.0 && y.is_finite() => run.push((px(x), py(y))),
                _ => {
                    flush(&mut run, &mut o);
                    if x > 0.0 && !gaps.contains(&x) {
                        gaps.push(x);
                        let gx = px(x);
                        let _ = writeln!(o, r#"<line x1="{gx:.2}" y1="{:.2}" x2="{gx:.2}" y2="{:.2}" stroke="{colour}" stroke-dasharray="2 2"/>"#, MARGIN_TOP, MARGIN_TOP + plot_h);
                    }
                }
            }
        }
        flush(&mut run, &mut o);
        let ly = MARGIN_TOP + 14.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(o, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="1.5"{dash}/>"#, lx + 24.0);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, esc(&s.label));
    }
    if !gaps.is_empty() {
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{} unconverged point(s) shown as gaps</text>"#,
            WIDTH - MARGIN_RIGHT + 12.0,
            HEIGHT - MARGIN_BOTTOM,
            gaps.len()
        );
    }
    o.push_str("</svg>\n");
    o
}

/// `F` against `a` for every squeezing value, optionally with `F±`.
pub fn fidelity_svg(rows: &[CurveRow], with_bounds: bool) -> String {
    let mut s_values: Vec<f64> = Vec::new();
    for r in rows {
        if !s_values.contains(&r.s) {
            s_values.push(r.s);
        }
    }
    let mut series = Vec::new();
    for &s in &s_values {
        let mut pts: Vec<&CurveRow> = rows.iter().filter(|r| r.s == s).collect();
        pts.sort_by(|x, y| x.a.total_cmp(&y.a));
        let take = |f: fn(&CurveRow) -> Option<f64>| -> Vec<(f64, Option<f64>)> {
            pts.iter().map(|r| (r.a, if r.converged { f(r) } else { None })).collect()
        };
        series.push(Series { label: format!("F, s = {s}"), points: take(|r| r.fidelity), dashed: false });
        if with_bounds {
            series.push(Series { label: format!("F+, s = {s}"), points: take(|r| r.f_plus), dashed: true });
            series.push(Series { label: format!("F-, s = {s}"), points: take(|r| r.f_minus), dashed: true });
        }
    }
    let spec = PlotSpec {
        title: "Fidelity against acceleration".into(),
        x_label: "a".into(),
        y_label: if with_bounds { "F, F±".into() } else { "F".into() },
        y_range: (0.0, 1.0),
    };
    log_x_plot(&spec, &series)
}
