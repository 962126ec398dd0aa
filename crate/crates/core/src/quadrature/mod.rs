//! Adaptive one-dimensional quadrature.
//!
//! The workhorse is a globally adaptive 21-point Gauss–Kronrod scheme that
//! refines in rounds: every round bisects the smallest set of segments that
//! carries at least half of the outstanding (normalised) error. Integrands
//! may be vector valued through [`QuadValue`], in which case every component
//! gets its own tolerance while all components share the same abscissae.
//!
//! Semi-infinite ranges are mapped onto `[0, 1)`; integrands carrying a
//! phase `κ ln x + ν x` go through [`integrate_log_chirp`], which switches
//! between Levin collocation and phase-panelled Gauss–Kronrod.

mod kronrod;
mod levin;
mod oscillatory;

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oscillatory::{integrate_log_chirp, integrate_log_oscillatory, LogChirp};

use kronrod::{GK21_NODES, GK21_WEIGHTS_GAUSS, GK21_WEIGHTS_KRONROD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand is not finite at x = {abscissa}")]
    NonFiniteIntegrand { abscissa: f64 },
    #[error("logarithmic phase undefined for lower limit {lo} <= 0")]
    NonPositiveLogDomain { lo: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: usize,
    /// Gauss–Kronrod panels per `2π` of phase on oscillatory paths.
    pub oscillation_panels_per_period: usize,
    /// Evaluate the abscissae of each refinement round on the rayon pool.
    pub parallel: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_evaluations: 4_000_000,
            oscillation_panels_per_period: 4,
            parallel: false,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(QuadratureError::InvalidConfig(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.oscillation_panels_per_period < 4 {
            return Err(QuadratureError::InvalidConfig(format!(
                "oscillation_panels_per_period must be >= 4, got {}",
                self.oscillation_panels_per_period
            )));
        }
        if self.max_evaluations < 21 {
            return Err(QuadratureError::InvalidConfig("max_evaluations below one rule".into()));
        }
        Ok(())
    }

    /// Tolerance for a value of magnitude `v`.
    pub fn tolerance_for(&self, v: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Converged at the double-precision round-off bound rather than at the
    /// requested tolerance; `error_estimate` is that bound.
    #[serde(default)]
    pub roundoff_limited: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl QuadratureResult {
    pub(crate) fn unconverged(value: Complex64, error_estimate: f64, evaluations: usize, why: String) -> Self {
        Self { value, error_estimate, evaluations, converged: false, roundoff_limited: false, diagnostic: Some(why) }
    }
}

/// Values that can be integrated: a fixed number of components, each with
/// its own magnitude for error control.
pub trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    const COMPONENTS: usize;
    fn zero() -> Self;
    fn component_abs(&self, i: usize) -> f64;

    /// Absolute uncertainty the sample itself carries in component `i`,
    /// e.g. the error of an inner integral. Segments whose error estimate is
    /// within the integrated noise are not refined further.
    fn component_noise(&self, _i: usize) -> f64 {
        0.0
    }

    fn is_finite(&self) -> bool {
        (0..Self::COMPONENTS).all(|i| self.component_abs(i).is_finite())
    }
}

impl QuadValue for f64 {
    const COMPONENTS: usize = 1;
    fn zero() -> Self {
        0.0
    }
    fn component_abs(&self, _: usize) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    const COMPONENTS: usize = 1;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn component_abs(&self, _: usize) -> f64 {
        self.norm()
    }
}

/// Outcome of a vector-valued adaptive integration.
#[derive(Debug, Clone)]
pub struct VectorQuadrature<V> {
    pub value: V,
    /// One estimate per component.
    pub errors: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    /// See [`QuadratureResult::roundoff_limited`].
    pub roundoff_limited: bool,
    pub segments: usize,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone)]
struct Segment<V> {
    lo: f64,
    hi: f64,
    value: V,
    errors: Vec<f64>,
    /// Per component: the error sits at its round-off bound or the sample noise.
    at_floor: Vec<bool>,
}

/// Per-component tolerances for a vector integration.
#[derive(Debug, Clone)]
pub struct ComponentTolerance {
    pub rel_tol: f64,
    /// Absolute floor per component; a single entry is broadcast.
    pub abs_tol: Vec<f64>,
}

impl ComponentTolerance {
    pub fn uniform(cfg: &QuadratureConfig) -> Self {
        Self { rel_tol: cfg.rel_tol, abs_tol: vec![cfg.abs_tol] }
    }

    fn abs(&self, i: usize) -> f64 {
        if self.abs_tol.len() == 1 {
            self.abs_tol[0]
        } else {
            self.abs_tol[i]
        }
    }
}

fn eval_batch<V, F>(f: &F, xs: &[f64], parallel: bool) -> Result<Vec<V>, QuadratureError>
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync + ?Sized,
{
    let check = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFiniteIntegrand { abscissa: x })
        }
    };
    if parallel && xs.len() > 1 {
        xs.par_iter().map(|&x| check(x)).collect()
    } else {
        xs.iter().map(|&x| check(x)).collect()
    }
}

fn abscissae(lo: f64, hi: f64) -> [f64; 21] {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut xs = [0.0; 21];
    xs[0] = centre;
    for j in 0..10 {
        xs[1 + 2 * j] = centre - half * GK21_NODES[j];
        xs[2 + 2 * j] = centre + half * GK21_NODES[j];
    }
    xs
}

/// Combine the 21 samples laid out by [`abscissae`] into a segment.
fn gk21_combine<V: QuadValue>(lo: f64, hi: f64, fx: &[V]) -> Segment<V> {
    let half = 0.5 * (hi - lo);
    let mut kronrod = fx[0] * GK21_WEIGHTS_KRONROD[10];
    let mut gauss = V::zero();
    for j in 0..10 {
        let pair = fx[1 + 2 * j] + fx[2 + 2 * j];
        kronrod = kronrod + pair * GK21_WEIGHTS_KRONROD[j];
        // Gauss-10 nodes are the odd-indexed Kronrod nodes
        if j % 2 == 1 {
            gauss = gauss + pair * GK21_WEIGHTS_GAUSS[j / 2];
        }
    }
    let value = kronrod * half;
    let mut errors = Vec::with_capacity(V::COMPONENTS);
    let mut at_floor = Vec::with_capacity(V::COMPONENTS);
    for c in 0..V::COMPONENTS {
        // |f| and |f - mean| integrals for the QUADPACK error scaling
        let kr_mean = kronrod * 0.5;
        let mut resabs = fx[0].component_abs(c) * GK21_WEIGHTS_KRONROD[10];
        let mut resasc = (fx[0] - kr_mean).component_abs(c) * GK21_WEIGHTS_KRONROD[10];
        for j in 0..10 {
            let w = GK21_WEIGHTS_KRONROD[j];
            resabs += w * (fx[1 + 2 * j].component_abs(c) + fx[2 + 2 * j].component_abs(c));
            resasc += w * ((fx[1 + 2 * j] - kr_mean).component_abs(c) + (fx[2 + 2 * j] - kr_mean).component_abs(c));
        }
        resabs *= half.abs();
        resasc *= half.abs();
        let raw = ((kronrod - gauss) * half).component_abs(c);
        let (err, floor_hit) = rescale_error(raw, resabs, resasc);
        let mut noise = fx[0].component_noise(c) * GK21_WEIGHTS_KRONROD[10];
        for j in 0..10 {
            noise += GK21_WEIGHTS_KRONROD[j] * (fx[1 + 2 * j].component_noise(c) + fx[2 + 2 * j].component_noise(c));
        }
        noise *= half.abs();
        at_floor.push(floor_hit || err == 0.0 || err <= noise);
        errors.push(err.max(noise));
    }
    Segment { lo, hi, value, errors, at_floor }
}

/// QUADPACK-style error scaling; the flag reports whether the round-off
/// floor set the estimate.
fn rescale_error(raw: f64, resabs: f64, resasc: f64) -> (f64, bool) {
    let mut err = raw;
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && floor > err {
        (floor, true)
    } else {
        (err, false)
    }
}

fn evaluate_segments<V, F>(
    f: &F,
    bounds: &[(f64, f64)],
    parallel: bool,
) -> Result<Vec<Segment<V>>, QuadratureError>
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync + ?Sized,
{
    let xs: Vec<f64> = bounds.iter().flat_map(|&(lo, hi)| abscissae(lo, hi)).collect();
    let fx = eval_batch(f, &xs, parallel)?;
    Ok(bounds
        .iter()
        .zip(fx.chunks(21))
        .map(|(&(lo, hi), vals)| gk21_combine(lo, hi, vals))
        .collect())
}

/// Globally adaptive vector integration starting from the given partition.
///
/// `breaks` must be strictly increasing with at least two entries. The
/// result is deterministic for a fixed configuration: segment order and
/// summation order do not depend on `cfg.parallel`.
pub fn integrate_vector<V, F>(
    f: &F,
    breaks: &[f64],
    tol: &ComponentTolerance,
    cfg: &QuadratureConfig,
) -> Result<VectorQuadrature<V>, QuadratureError>
where
    V: QuadValue,
    F: Fn(f64) -> V + Sync + ?Sized,
{
    cfg.validate()?;
    if breaks.len() < 2 {
        return Err(QuadratureError::InvalidInterval { lo: f64::NAN, hi: f64::NAN });
    }
    for w in breaks.windows(2) {
        if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(QuadratureError::InvalidInterval { lo: w[0], hi: w[1] });
        }
    }
    let initial: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    if initial.len() * 21 > cfg.max_evaluations {
        return Ok(VectorQuadrature {
            value: V::zero(),
            errors: vec![f64::INFINITY; V::COMPONENTS],
            evaluations: 0,
            converged: false,
            roundoff_limited: false,
            segments: 0,
            diagnostic: Some(format!(
                "initial partition of {} panels exceeds the evaluation budget {}",
                initial.len(),
                cfg.max_evaluations
            )),
        });
    }
    let mut segments = evaluate_segments(f, &initial, cfg.parallel)?;
    let mut evaluations = 21 * initial.len();

    loop {
        let (total, errs) = totals(&segments);
        let tols: Vec<f64> = (0..V::COMPONENTS)
            .map(|c| tol.abs(c).max(tol.rel_tol * total.component_abs(c)))
            .collect();
        if errs.iter().zip(&tols).all(|(e, t)| e <= t) {
            return Ok(VectorQuadrature { value: total, errors: errs, evaluations, converged: true, roundoff_limited: false, segments: segments.len(), diagnostic: None });
        }

        // normalised error share of every segment
        let mut ranked: Vec<(usize, f64)> = segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                // components at their floor cannot improve by splitting
                let r = s
                    .errors
                    .iter()
                    .zip(&tols)
                    .zip(&s.at_floor)
                    .filter(|(_, floor)| !**floor)
                    .map(|((e, t), _)| e / t)
                    .fold(0.0, f64::max);
                (i, r)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let total_share: f64 = ranked.iter().map(|r| r.1).sum();

        let budget_left = cfg.max_evaluations.saturating_sub(evaluations) / 42;
        let mut chosen = Vec::new();
        let mut too_narrow = false;
        let mut remaining = total_share;
        for &(i, r) in &ranked {
            if remaining <= 0.5 || chosen.len() >= budget_left {
                break;
            }
            let s = &segments[i];
            let width_ok = (s.hi - s.lo) > 64.0 * f64::EPSILON * s.lo.abs().max(s.hi.abs()).max(f64::MIN_POSITIVE);
            too_narrow |= !width_ok;
            if r == 0.0 || !width_ok {
                continue;
            }
            chosen.push(i);
            remaining -= r;
        }
        if chosen.is_empty() {
            // every offending segment sits at its 50ε round-off bound or at
            // the noise of its samples: nothing finer is attainable
            let limited = budget_left > 0 && !too_narrow;
            let why = if budget_left == 0 {
                format!("evaluation budget of {} exhausted", cfg.max_evaluations)
            } else if limited {
                "round-off limited".to_string()
            } else {
                "segments narrowed to machine precision".to_string()
            };
            let worst = ranked.first().map(|r| segments[r.0].hi).unwrap_or(f64::NAN);
            return Ok(VectorQuadrature {
                value: total,
                errors: errs,
                evaluations,
                converged: limited,
                roundoff_limited: limited,
                segments: segments.len(),
                diagnostic: Some(format!("{why}; worst segment ends at {worst}")),
            });
        }
        chosen.sort_unstable();
        let mut halves = Vec::with_capacity(2 * chosen.len());
        for &i in &chosen {
            let s = &segments[i];
            let mid = 0.5 * (s.lo + s.hi);
            halves.push((s.lo, mid));
            halves.push((mid, s.hi));
        }
        let fresh = evaluate_segments(f, &halves, cfg.parallel)?;
        evaluations += 21 * halves.len();

        // splice children back in place to keep segments ordered by abscissa
        let mut next = Vec::with_capacity(segments.len() + chosen.len());
        let mut fresh_iter = fresh.into_iter();
        let mut pick = chosen.iter().peekable();
        for (i, s) in segments.into_iter().enumerate() {
            if pick.peek() == Some(&&i) {
                pick.next();
                next.push(fresh_iter.next().unwrap());
                next.push(fresh_iter.next().unwrap());
            } else {
                next.push(s);
            }
        }
        segments = next;
    }
}

fn totals<V: QuadValue>(segments: &[Segment<V>]) -> (V, Vec<f64>) {
    let mut total = V::zero();
    let mut errs = vec![0.0; V::COMPONENTS];
    for s in segments {
        total = total + s.value;
        for (e, se) in errs.iter_mut().zip(&s.errors) {
            *e += se;
        }
    }
    (total, errs)
}

fn scalar_result(v: VectorQuadrature<Complex64>) -> QuadratureResult {
    QuadratureResult {
        value: v.value,
        error_estimate: v.errors[0],
        evaluations: v.evaluations,
        converged: v.converged,
        roundoff_limited: v.roundoff_limited,
        diagnostic: v.diagnostic,
    }
}

/// `∫_lo^hi f(x) dx` for a complex integrand.
pub fn integrate<F>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(QuadratureError::InvalidInterval { lo, hi });
    }
    integrate_vector(&f, &[lo, hi], &ComponentTolerance::uniform(cfg), cfg).map(scalar_result)
}

/// Number of equal panels the mapped interval `[0, 1)` starts with.
const INFINITE_MAP_PANELS: usize = 16;

/// `∫_lo^∞ f(x) dx` through `x = lo + t / (1 - t)`.
///
/// The segment touching `t = 1` carries the tail; when refinement stalls
/// there the result is flagged as a non-decaying tail.
pub fn integrate_to_infinity<F>(f: F, lo: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    if !lo.is_finite() {
        return Err(QuadratureError::InvalidInterval { lo, hi: f64::INFINITY });
    }
    let mapped = |t: f64| {
        let s = 1.0 - t;
        let x = lo + t / s;
        if x.is_infinite() {
            return Complex64::new(0.0, 0.0);
        }
        f(x) / (s * s)
    };
    let breaks: Vec<f64> = (0..=INFINITE_MAP_PANELS).map(|i| i as f64 / INFINITE_MAP_PANELS as f64).collect();
    let res = integrate_vector(&mapped, &breaks, &ComponentTolerance::uniform(cfg), cfg);
    let res = match res {
        Err(QuadratureError::NonFiniteIntegrand { abscissa }) => {
            let x = lo + abscissa / (1.0 - abscissa);
            return Err(QuadratureError::NonFiniteIntegrand { abscissa: x });
        }
        other => other?,
    };
    let mut out = scalar_result(res);
    if !out.converged {
        // decaying integrands converge well before the budget; anything that
        // keeps refining is blamed on the tail unless the worst piece is interior
        let tail_blamed = out.diagnostic.as_deref().map_or(true, |d| d.contains("ends at 1"));
        if tail_blamed {
            out.diagnostic = Some(format!(
                "non-decaying tail: refinement did not settle near infinity ({})",
                out.diagnostic.unwrap_or_default()
            ));
        }
    }
    Ok(out)
}
