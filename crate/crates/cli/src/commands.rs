//! `overlaps`, `curve` and `sweep`.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use horizon::output::{curve_csv, fidelity_svg, format_float, record_line, records_jsonl, CurveRow};
use horizon::overlap::{compute_overlaps_with, OverlapError, ScenarioInputs, SpectrumEngine, SpectrumKind};
use horizon::sweep::{
    check_failures, fidelity_curve, interior_minima, log_grid, unruh_asymptotics, FidelityMinimum, PowerLawFit,
    SweepConfig, SweepRecord, Sweeper,
};
use horizon::quadrature::QuadratureError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const CURVE_CSV: &str = "curve.csv";
pub const CURVE_SVG: &str = "curve.svg";
pub const SWEEP_JSONL: &str = "sweep.jsonl";
pub const SWEEP_CONFIG: &str = "sweep_config.json";
pub const SWEEP_SUMMARY: &str = "summary.json";
pub const OVERLAPS_JSON: &str = "overlaps.json";
/// Wavenumber samples per dumped spectrum.
pub const SPECTRUM_SAMPLES: usize = 200;

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Usage, configuration or I/O problem; exit 1.
    Config(String),
    /// Numerical non-convergence; exit 2.
    Numerical(String),
    /// Internal oracle mismatch; exit 3.
    Oracle(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Oracle(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Oracle(m) => m,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(io(path))
}

/// Writes through a temporary sibling so readers never see a partial file.
fn replace_file(path: &Path, contents: &str) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(io(path))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io(dir))
}

fn overlap_failure(e: OverlapError) -> Failure {
    match e {
        OverlapError::Quadrature(QuadratureError::InvalidConfig(m)) => Failure::Config(m),
        OverlapError::Quadrature(q) => Failure::Numerical(q.to_string()),
        other => Failure::Config(other.to_string()),
    }
}

pub struct OverlapsArgs {
    pub a: f64,
    pub out: Option<PathBuf>,
    pub dump_spectra: bool,
}

/// Single-point overlaps as pretty JSON; the text is also returned for stdout.
pub fn overlaps(cfg: &RunConfig, args: &OverlapsArgs) -> Result<String, Failure> {
    let inputs = ScenarioInputs::new(args.a, cfg.scenario.n_param, cfg.scenario.cutoff, cfg.quadrature.resolve())
        .map_err(overlap_failure)?;
    let engine = SpectrumEngine::new(&inputs).map_err(overlap_failure)?;
    let ov = compute_overlaps_with(&engine).map_err(overlap_failure)?;
    let json = serde_json::to_string_pretty(&ov).expect("overlaps serialise") + "\n";
    if args.out.is_some() || args.dump_spectra {
        let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        ensure_dir(&dir)?;
        write_file(&dir.join(OVERLAPS_JSON), &json)?;
        if args.dump_spectra {
            dump_spectra(&engine, inputs.cutoff(), ov.k_truncation, &dir)?;
        }
    }
    if !ov.converged() {
        eprint!("{json}");
        return Err(Failure::Numerical(format!(
            "overlaps at a = {} did not converge: {}",
            args.a,
            ov.convergence.diagnostics.join("; ")
        )));
    }
    Ok(json)
}

pub fn spectrum_file(kind: SpectrumKind) -> String {
    format!("spectrum_{}.csv", kind.label())
}

fn dump_spectra(engine: &SpectrumEngine, cutoff: f64, k_max: f64, dir: &Path) -> Result<(), Failure> {
    let magnitudes = log_grid(cutoff, k_max.max(2.0 * cutoff), SPECTRUM_SAMPLES);
    for kind in SpectrumKind::ALL {
        let values = engine.tabulate(kind, &magnitudes).map_err(overlap_failure)?;
        let mut csv = String::from("k,re,im,error_estimate,converged\n");
        for v in &values {
            let cells = [
                format_float(v.k),
                format_float(v.value.re),
                format_float(v.value.im),
                format_float(v.error_estimate),
                v.converged.to_string(),
            ];
            csv.push_str(&cells.join(","));
            csv.push('\n');
        }
        write_file(&dir.join(spectrum_file(kind)), &csv)?;
    }
    Ok(())
}

/// Every `(a, s)` key in sweep order.
fn keys(cfg: &SweepConfig) -> Vec<(f64, f64)> {
    cfg.a_grid.iter().flat_map(|&a| cfg.s_values.iter().map(move |&s| (a, s))).collect()
}

fn key_bits(a: f64, s: f64) -> (u64, u64) {
    (a.to_bits(), s.to_bits())
}

/// Computes `todo` in parallel, one task per acceleration so each overlap
/// set is computed once; `sink` sees every record as it completes.
fn compute(sweeper: &Sweeper, todo: &[(f64, f64)], sink: &(dyn Fn(&SweepRecord) -> Result<(), Failure> + Sync)) -> Result<Vec<SweepRecord>, Failure> {
    let mut by_a: Vec<(f64, Vec<f64>)> = Vec::new();
    for &(a, s) in todo {
        match by_a.last_mut() {
            Some((last, ss)) if *last == a => ss.push(s),
            _ => by_a.push((a, vec![s])),
        }
    }
    let nested: Result<Vec<Vec<SweepRecord>>, Failure> = by_a
        .par_iter()
        .map(|(a, ss)| {
            ss.iter()
                .map(|&s| {
                    let r = sweeper.record(*a, s);
                    sink(&r)?;
                    Ok(r)
                })
                .collect()
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

fn write_curve(records: &[SweepRecord], dir: &Path, bounds: bool) -> Result<Vec<CurveRow>, Failure> {
    let rows: Vec<CurveRow> = records.iter().map(CurveRow::from_record).collect();
    write_file(&dir.join(CURVE_CSV), &curve_csv(&rows))?;
    write_file(&dir.join(CURVE_SVG), &fidelity_svg(&rows, bounds))?;
    Ok(rows)
}

fn convergence_verdict(records: &[SweepRecord]) -> Result<(), Failure> {
    check_failures(records).map_err(|e| Failure::Numerical(e.to_string()))?;
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("a = {}, s = {}: {}", r.a, r.s, r.failure.as_deref().unwrap_or("")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("{} point(s) unconverged, shown as gaps:\n  {}", failed.len(), failed.join("\n  "))))
    }
}

/// Grid minima of every curve, for the terminal summary.
fn curve_summary(records: &[SweepRecord], cfg: &SweepConfig) -> String {
    let mut out = String::new();
    for &s in &cfg.s_values {
        let curve = fidelity_curve(records, s);
        match curve.iter().min_by(|x, y| x.fidelity.total_cmp(&y.fidelity)) {
            Some(p) => out.push_str(&format!(
                "s = {s}: smallest F = {:.6} (F+ = {:.6}) at a = {:.4e}; {} interior minim(a)\n",
                p.fidelity,
                p.f_plus,
                p.a,
                interior_minima(&curve).len()
            )),
            None => out.push_str(&format!("s = {s}: no converged points\n")),
        }
    }
    out
}

pub struct CurveArgs {
    pub out: PathBuf,
    pub bounds: bool,
}

/// Returns the terminal summary.
pub fn curve(cfg: &SweepConfig, args: &CurveArgs) -> Result<String, Failure> {
    let sweeper = Sweeper::new(cfg.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    ensure_dir(&args.out)?;
    let records = compute(&sweeper, &keys(cfg), &|_| Ok(()))?;
    write_curve(&records, &args.out, args.bounds)?;
    let summary = curve_summary(&records, cfg);
    convergence_verdict(&records).map_err(|e| Failure::Numerical(format!("{summary}{}", e.message())))?;
    Ok(summary)
}

/// Minima and power-law fit written next to a finished sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub minima: Vec<MinimumEntry>,
    pub unruh_fit: Result<PowerLawFit, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimumEntry {
    pub s: f64,
    pub minimum: Result<FidelityMinimum, String>,
}

pub struct SweepArgs {
    pub out: PathBuf,
    pub bounds: bool,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub computed: usize,
    pub reused: usize,
    pub summary: SweepSummary,
}

/// Reads the records of an interrupted or finished sweep. A final line cut
/// short by an interruption is dropped.
fn load_existing(path: &Path) -> Result<Vec<SweepRecord>, Failure> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(path)(e)),
    };
    let complete = if text.ends_with('\n') { &text[..] } else { &text[..text.rfind('\n').map_or(0, |i| i + 1)] };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::Config(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Refuses to resume into a directory produced by a different configuration.
fn check_resume_config(dir: &Path, cfg: &SweepConfig) -> Result<(), Failure> {
    let path = dir.join(SWEEP_CONFIG);
    let json = serde_json::to_string_pretty(cfg).expect("config serialises") + "\n";
    match fs::read_to_string(&path) {
        Ok(existing) => {
            let previous: SweepConfig = serde_json::from_str(&existing)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            if &previous != cfg {
                return Err(Failure::Config(format!(
                    "{} holds a sweep with a different configuration; use a fresh output directory",
                    dir.display()
                )));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => write_file(&path, &json),
        Err(e) => Err(io(&path)(e)),
    }
}

fn summarise(sweeper: &Sweeper, records: &[SweepRecord]) -> SweepSummary {
    let cfg = sweeper.config();
    let minima = cfg
        .s_values
        .iter()
        .map(|&s| MinimumEntry { s, minimum: sweeper.find_fidelity_minimum(records, s).map_err(|e| e.to_string()) })
        .collect();
    SweepSummary { minima, unruh_fit: unruh_asymptotics(records, cfg.cutoff).map_err(|e| e.to_string()) }
}

/// Runs or resumes a sweep into `args.out`.
pub fn sweep(cfg: &SweepConfig, args: &SweepArgs) -> Result<SweepOutcome, Failure> {
    let sweeper = Sweeper::new(cfg.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    ensure_dir(&args.out)?;
    check_resume_config(&args.out, cfg)?;
    let jsonl = args.out.join(SWEEP_JSONL);
    let wanted = keys(cfg);
    let wanted_set: HashSet<(u64, u64)> = wanted.iter().map(|&(a, s)| key_bits(a, s)).collect();
    let mut existing: Vec<SweepRecord> =
        load_existing(&jsonl)?.into_iter().filter(|r| wanted_set.contains(&key_bits(r.a, r.s))).collect();
    let mut seen = HashSet::new();
    existing.retain(|r| seen.insert(key_bits(r.a, r.s)));
    let todo: Vec<(f64, f64)> = wanted.iter().copied().filter(|&(a, s)| !seen.contains(&key_bits(a, s))).collect();

    // keep only complete lines, then append new records as they finish
    replace_file(&jsonl, &records_jsonl(&existing))?;
    let file = OpenOptions::new().append(true).open(&jsonl).map_err(io(&jsonl))?;
    let file = Mutex::new(file);
    let sink = |r: &SweepRecord| -> Result<(), Failure> {
        let mut f = file.lock().expect("sweep file lock");
        writeln!(f, "{}", record_line(r)).and_then(|_| f.flush()).map_err(io(&jsonl))
    };
    let fresh = compute(&sweeper, &todo, &sink)?;
    drop(file);

    let computed = fresh.len();
    let reused = existing.len();
    let mut all = existing;
    all.extend(fresh);
    let order: std::collections::HashMap<(u64, u64), usize> =
        wanted.iter().enumerate().map(|(i, &(a, s))| (key_bits(a, s), i)).collect();
    all.sort_by_key(|r| order[&key_bits(r.a, r.s)]);
    replace_file(&jsonl, &records_jsonl(&all))?;
    write_curve(&all, &args.out, args.bounds)?;

    let summary_path = args.out.join(SWEEP_SUMMARY);
    let previous: Option<SweepSummary> = if computed == 0 {
        fs::read_to_string(&summary_path).ok().and_then(|t| serde_json::from_str(&t).ok())
    } else {
        None
    };
    let summary = match previous {
        Some(s) => s,
        None => {
            let s = summarise(&sweeper, &all);
            write_file(&summary_path, &(serde_json::to_string_pretty(&s).expect("summary serialises") + "\n"))?;
            s
        }
    };
    convergence_verdict(&all)?;
    Ok(SweepOutcome { computed, reused, summary })
}
