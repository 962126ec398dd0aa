//! Acceleration × squeezing sweeps, the fidelity minimum and the large-`a`
//! growth of the detector's thermal occupation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{
    covariance_entangled, covariance_separable, cross_term, fidelity_from_blocks, CovarianceMatrix,
    DiscriminationResult, ModeCoefficients, SqueezingParam, CROSS_BLOCK_SIGN,
};
use crate::modes::WavePacketSpec;
use crate::overlap::{compute_overlaps, OverlapError, OverlapSet, ScenarioInputs};
use crate::quadrature::QuadratureConfig;

/// Sweeps with more failed grid points than this fraction are errors.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
/// Pipeline evaluations allowed for refining one minimum.
pub const MAX_REFINE_EVALUATIONS: usize = 20;
/// Refinement stops once the bracket satisfies `hi/lo - 1 ≤` this.
pub const MINIMUM_LOCALIZATION: f64 = 0.01;
pub const DEFAULT_GRID_POINTS: usize = 40;
pub const DEFAULT_A_MIN: f64 = 1e-3;
pub const DEFAULT_A_MAX: f64 = 1e2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("{failed} of {total} grid points failed; first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
    #[error("no interior fidelity minimum for s = {s}: {detail}")]
    NoInteriorMinimum { s: f64, detail: String },
    #[error("insufficient coverage for a power-law fit: {0}")]
    InsufficientCoverage(String),
    #[error("pipeline failed at a = {a}, s = {s}: {message}")]
    Pipeline { a: f64, s: f64, message: String },
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l, h) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => (l + (h - l) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub a_grid: Vec<f64>,
    pub s_values: Vec<f64>,
    pub n_param: f64,
    pub cutoff: f64,
    pub quad_cfg: QuadratureConfig,
    pub refine_minimum: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a_grid: log_grid(DEFAULT_A_MIN, DEFAULT_A_MAX, DEFAULT_GRID_POINTS),
            s_values: vec![1.0, 2.0, 3.0],
            n_param: WavePacketSpec::DEFAULT_N,
            cutoff: WavePacketSpec::DEFAULT_CUTOFF,
            quad_cfg: ScenarioInputs::default_quadrature(),
            refine_minimum: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidConfig(m));
        if self.a_grid.is_empty() {
            return bad("a_grid is empty".into());
        }
        if let Some(a) = self.a_grid.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return bad(format!("a_grid entries must be positive and finite, got {a}"));
        }
        if self.a_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("a_grid must be strictly ascending".into());
        }
        if self.s_values.is_empty() {
            return bad("s_values is empty".into());
        }
        for &s in &self.s_values {
            SqueezingParam::new(s).map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
        }
        for &a in &self.a_grid {
            self.inputs(a).map_err(|e| SweepError::InvalidConfig(format!("a = {a}: {e}")))?;
        }
        Ok(())
    }

    pub fn inputs(&self, a: f64) -> Result<ScenarioInputs, OverlapError> {
        ScenarioInputs::new(a, self.n_param, self.cutoff, self.quad_cfg)
    }
}

/// One `(a, s)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub a: f64,
    pub s: f64,
    pub overlaps: Option<OverlapSet>,
    pub sigma: Option<CovarianceMatrix>,
    pub sigma_s: Option<CovarianceMatrix>,
    pub result: Option<DiscriminationResult>,
    /// Seconds spent on this point, including the shared overlap computation
    /// when this point triggered it.
    pub wall_time: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

impl SweepRecord {
    pub fn fidelity(&self) -> Option<f64> {
        self.result.map(|r| r.fidelity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey([u64; 7]);

impl CacheKey {
    fn new(inputs: &ScenarioInputs) -> Self {
        let q = inputs.quad_cfg();
        Self([
            inputs.accel().value().to_bits(),
            inputs.n_param().to_bits(),
            inputs.cutoff().to_bits(),
            q.rel_tol.to_bits(),
            q.abs_tol.to_bits(),
            q.max_evaluations as u64,
            q.oscillation_panels_per_period as u64,
        ])
    }
}

type Slot = Arc<OnceLock<Result<OverlapSet, OverlapError>>>;

/// Overlap sets keyed by acceleration, packet parameters and tolerances.
///
/// Concurrent requests for the same key compute once; distinct keys proceed
/// in parallel.
#[derive(Debug, Default)]
pub struct OverlapCache {
    slots: Mutex<HashMap<CacheKey, Slot>>,
}

impl OverlapCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, inputs: &ScenarioInputs) -> Result<OverlapSet, OverlapError> {
        let slot = {
            let mut map = self.slots.lock().unwrap();
            Arc::clone(map.entry(CacheKey::new(inputs)).or_default())
        };
        slot.get_or_init(|| compute_overlaps(inputs)).clone()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Covariances and fidelity for one squeezing value on a fixed overlap set.
pub fn evaluate_point(overlaps: &OverlapSet, s: f64) -> Result<(CovarianceMatrix, CovarianceMatrix, DiscriminationResult), String> {
    let sq = SqueezingParam::new(s).map_err(|e| e.to_string())?;
    let sigma = covariance_entangled(overlaps, sq).map_err(|e| e.to_string())?;
    let sigma_s = covariance_separable(overlaps, sq).map_err(|e| e.to_string())?;
    // the cross block is passed as is so that tiny differences keep their digits
    let cross = cross_term(&ModeCoefficients::from_overlaps(overlaps), sq, CROSS_BLOCK_SIGN);
    let result = fidelity_from_blocks(&sigma_s, &cross).map_err(|e| e.to_string())?;
    Ok((sigma, sigma_s, result))
}

/// Sweep driver holding the configuration and the overlap cache.
#[derive(Debug)]
pub struct Sweeper {
    cfg: SweepConfig,
    cache: OverlapCache,
}

impl Sweeper {
    pub fn new(cfg: SweepConfig) -> Result<Self, SweepError> {
        cfg.validate()?;
        Ok(Self { cfg, cache: OverlapCache::new() })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &OverlapCache {
        &self.cache
    }

    /// Full pipeline at one `(a, s)`.
    pub fn record(&self, a: f64, s: f64) -> SweepRecord {
        let start = Instant::now();
        let failed = |overlaps, message: String, start: Instant| SweepRecord {
            a,
            s,
            overlaps,
            sigma: None,
            sigma_s: None,
            result: None,
            wall_time: start.elapsed().as_secs_f64(),
            converged: false,
            failure: Some(message),
        };
        let overlaps = match self.cfg.inputs(a).and_then(|inp| self.cache.get(&inp)) {
            Ok(ov) => ov,
            Err(e) => return failed(None, e.to_string(), start),
        };
        if !overlaps.converged() {
            let why = overlaps.convergence.diagnostics.join("; ");
            return failed(Some(overlaps), format!("overlaps not converged: {why}"), start);
        }
        match evaluate_point(&overlaps, s) {
            Ok((sigma, sigma_s, result)) => SweepRecord {
                a,
                s,
                overlaps: Some(overlaps),
                sigma: Some(sigma),
                sigma_s: Some(sigma_s),
                result: Some(result),
                wall_time: start.elapsed().as_secs_f64(),
                converged: true,
                failure: None,
            },
            Err(m) => failed(Some(overlaps), m, start),
        }
    }

    /// Records ordered by `a`, then by `s` in configuration order.
    pub fn run(&self) -> Result<Vec<SweepRecord>, SweepError> {
        let records: Vec<SweepRecord> = self
            .cfg
            .a_grid
            .par_iter()
            .flat_map_iter(|&a| self.cfg.s_values.iter().map(move |&s| (a, s)).collect::<Vec<_>>())
            .map(|(a, s)| self.record(a, s))
            .collect();
        check_failures(&records)?;
        Ok(records)
    }

    /// Refines the grid minimum of `F` for one `s` by golden-section search
    /// in `ln a`, re-running the pipeline at each probe.
    pub fn find_fidelity_minimum(&self, records: &[SweepRecord], s: f64) -> Result<FidelityMinimum, SweepError> {
        let curve = fidelity_curve(records, s);
        if curve.len() < 5 {
            return Err(SweepError::NoInteriorMinimum {
                s,
                detail: format!("{} converged points, at least 5 needed", curve.len()),
            });
        }
        let best = (0..curve.len())
            .min_by(|&i, &j| curve[i].fidelity.total_cmp(&curve[j].fidelity).then(i.cmp(&j)))
            .expect("non-empty");
        if best == 0 || best == curve.len() - 1 {
            let end = if best == 0 { "lower" } else { "upper" };
            return Err(SweepError::NoInteriorMinimum {
                s,
                detail: format!("curve is monotone; smallest F = {} at the {end} grid end", curve[best].fidelity),
            });
        }
        let grid_min = curve[best];
        let mut found = FidelityMinimum {
            s,
            a_star: grid_min.a,
            f_min: grid_min.fidelity,
            f_plus_min: grid_min.f_plus,
            f_minus_min: grid_min.f_minus,
            bracket: (curve[best - 1].a, curve[best + 1].a),
            evaluations: 0,
            refined: false,
        };
        if !self.cfg.refine_minimum {
            return Ok(found);
        }

        let probe = |x: f64| -> Result<DiscriminationResult, SweepError> {
            let a = x.exp();
            let r = self.record(a, s);
            r.result.ok_or_else(|| SweepError::Pipeline { a, s, message: r.failure.unwrap_or_default() })
        };
        let consider = |a: f64, r: &DiscriminationResult, found: &mut FidelityMinimum| {
            if r.fidelity < found.f_min {
                found.a_star = a;
                found.f_min = r.fidelity;
                found.f_plus_min = r.f_plus;
                found.f_minus_min = r.f_minus;
            }
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (found.bracket.0.ln(), found.bracket.1.ln());
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = probe(x1)?;
        let mut f2 = probe(x2)?;
        found.evaluations = 2;
        consider(x1.exp(), &f1, &mut found);
        consider(x2.exp(), &f2, &mut found);
        while hi - lo > MINIMUM_LOCALIZATION.ln_1p() && found.evaluations < MAX_REFINE_EVALUATIONS {
            if f1.fidelity <= f2.fidelity {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = probe(x1)?;
                consider(x1.exp(), &f1, &mut found);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = probe(x2)?;
                consider(x2.exp(), &f2, &mut found);
            }
            found.evaluations += 1;
        }
        found.bracket = (lo.exp(), hi.exp());
        found.refined = hi - lo <= MINIMUM_LOCALIZATION.ln_1p();
        Ok(found)
    }
}

/// Refuses a record set with more than `MAX_FAILURE_FRACTION` failed points.
pub fn check_failures(records: &[SweepRecord]) -> Result<(), SweepError> {
    let failed: Vec<&SweepRecord> = records.iter().filter(|r| !r.converged).collect();
    if failed.len() as f64 > MAX_FAILURE_FRACTION * records.len() as f64 {
        return Err(SweepError::TooManyFailures {
            failed: failed.len(),
            total: records.len(),
            first: failed
                .first()
                .map(|r| format!("a = {}, s = {}: {}", r.a, r.s, r.failure.as_deref().unwrap_or("")))
                .unwrap_or_default(),
        });
    }
    Ok(())
}

pub fn run_sweep(cfg: SweepConfig) -> Result<Vec<SweepRecord>, SweepError> {
    Sweeper::new(cfg)?.run()
}

/// One converged point of an `F(a)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub a: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub f_minus: f64,
    pub f_plus: f64,
}

/// Converged records with squeezing `s`, ordered by `a`.
pub fn fidelity_curve(records: &[SweepRecord], s: f64) -> Vec<CurvePoint> {
    let mut pts: Vec<CurvePoint> = records
        .iter()
        .filter(|r| r.s == s && r.converged)
        .filter_map(|r| {
            r.result.map(|d| CurvePoint {
                a: r.a,
                fidelity: d.fidelity,
                infidelity: d.infidelity,
                f_minus: d.f_minus,
                f_plus: d.f_plus,
            })
        })
        .collect();
    pts.sort_by(|x, y| x.a.total_cmp(&y.a));
    pts
}

/// Indices of strict interior local minima of `F`, judged on `1 - F` so that
/// values indistinguishable from one in `F` still order correctly.
pub fn interior_minima(curve: &[CurvePoint]) -> Vec<usize> {
    (1..curve.len().saturating_sub(1))
        .filter(|&i| curve[i].infidelity > curve[i - 1].infidelity && curve[i].infidelity > curve[i + 1].infidelity)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityMinimum {
    pub s: f64,
    pub a_star: f64,
    pub f_min: f64,
    pub f_plus_min: f64,
    pub f_minus_min: f64,
    /// Final bracket on `a`.
    pub bracket: (f64, f64),
    /// Pipeline runs spent on refinement.
    pub evaluations: usize,
    /// Whether the bracket reached the localisation target.
    pub refined: bool,
}

/// Golden-section refinement with a fresh cache; see [`Sweeper::find_fidelity_minimum`].
pub fn find_fidelity_minimum(records: &[SweepRecord], s: f64, cfg: &SweepConfig) -> Result<FidelityMinimum, SweepError> {
    Sweeper::new(cfg.clone())?.find_fidelity_minimum(records, s)
}

/// Least-squares line through `(ln a, ln n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub residual_rms: f64,
    pub max_residual: f64,
}

/// `(a, ln ⟨n⟩_U)` per distinct converged acceleration, ascending in `a`.
pub fn unruh_series(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut sorted: Vec<&SweepRecord> = records.iter().filter(|r| r.converged).collect();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    for r in sorted {
        if let Some(ov) = &r.overlaps {
            if pts.last().map_or(true, |&(a, _)| a != r.a) {
                pts.push((r.a, ov.log_n_unruh));
            }
        }
    }
    pts
}

/// Power-law fit of `⟨n⟩_U` against `a` over `[lo, hi]`.
pub fn fit_power_law(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<PowerLawFit, SweepError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(a, ln_n)| *a >= lo * (1.0 - 1e-12) && *a <= hi * (1.0 + 1e-12) && ln_n.is_finite())
        .map(|&(a, ln_n)| (a.ln(), ln_n))
        .collect();
    if pts.len() < 3 {
        return Err(SweepError::InsufficientCoverage(format!("{} usable points in [{lo:e}, {hi:e}]", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    Ok(PowerLawFit {
        slope,
        intercept,
        window: (lo, hi),
        points: pts.len(),
        residual_rms: (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt(),
        max_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
    })
}

/// Log–log slope of `⟨n⟩_U` over the top decade of the grid.
///
/// Only accelerations above `2π·cutoff` enter; below that the occupation is
/// exponentially small rather than a power law.
pub fn unruh_asymptotics(records: &[SweepRecord], cutoff: f64) -> Result<PowerLawFit, SweepError> {
    let series = unruh_series(records);
    let threshold = 2.0 * std::f64::consts::PI * cutoff;
    let Some(&(a_max, _)) = series.last() else {
        return Err(SweepError::InsufficientCoverage("no converged records".into()));
    };
    if a_max < 10.0 * threshold {
        return Err(SweepError::InsufficientCoverage(format!(
            "grid ends at a = {a_max:e}, below one decade above 2π·cutoff = {threshold:e}"
        )));
    }
    fit_power_law(&series, a_max / 10.0, a_max)
}
