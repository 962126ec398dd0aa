//! Rindler spectra of the two packets and the scalars built from them.
//!
//! Every spectrum is a single log-chirp integral over the packet support:
//!
//! ```text
//! (w_k, φ) = N · C(k) · ∫ E(m) m^{-1/2} e^{i(k/a · ln m ∓ m/a)} dm,   m = |l| ∈ [Λ, N + 12]
//! ```
//!
//! where `E` is the real Gaussian envelope of the packet overlap and `C(k)`
//! the `l`-independent part of the Bogoliubov coefficient. The `∓ m/a`
//! term is the translation phase of a packet centred at `±1/a`; it is
//! `-m/a` for the plain spectra and `+m/a` for the conjugated ones.
//!
//! The outer `k` integrals run over `[Λ, ∞)` in doubling windows and share
//! one vector integrand, so each `k` node computes all four spectra once.

use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modes::{log_bogoliubov, minkowski_gaussian_overlap, Acceleration, Direction, ModesError, WavePacketSpec};
use crate::quadrature::{
    integrate_log_chirp, integrate_to_infinity, integrate_vector, ComponentTolerance, LogChirp, QuadValue,
    QuadratureConfig, QuadratureError,
};
use crate::specfun::{unruh_occupation_scaled, RindlerFrequency};

/// The inner integrals stop `ENVELOPE_REACH` wavenumbers above the packet's
/// central frequency, where the envelope is below `e^{-36}`.
pub const ENVELOPE_REACH: f64 = 12.0;
/// Accelerations outside this range are refused.
pub const MIN_ACCEL: f64 = 1e-4;
pub const MAX_ACCEL: f64 = 1e3;

/// Inner integrals run this much tighter than the outer ones.
const INNER_TOL_FACTOR: f64 = 0.5;
/// Absolute accuracy floor of the inner integrals relative to `∫|integrand|`:
/// the `50ε` round-off bound of a Kronrod estimate, for each of the real and
/// imaginary parts, with a factor two of headroom.
const INNER_ROUNDOFF_FLOOR: f64 = 200.0 * f64::EPSILON;
/// Absolute floor for quantities that may legitimately be astronomically small.
const TINY: f64 = 1e-290;
/// A doubling window is the last one once it adds less than this fraction
/// of `rel_tol` to every accumulated component.
const WINDOW_STOP_FRACTION: f64 = 0.1;
const MAX_WINDOWS: usize = 64;
const FIRST_WINDOW_PANELS: usize = 24;
const WINDOW_PANELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverlapError {
    #[error(transparent)]
    Modes(#[from] ModesError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("acceleration {accel} outside the supported range [{MIN_ACCEL:e}, {MAX_ACCEL:e}]")]
    DegenerateRegime { accel: f64 },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("spectrum {kind:?} requires {requirement}, got k = {k}")]
    WrongHalfLine { kind: SpectrumKind, k: f64, requirement: &'static str },
}

/// Packets and quadrature settings for one acceleration.
///
/// Packet centres are tied to the acceleration (`∓1/a`), so they are not
/// freely settable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioInputs {
    accel: Acceleration,
    packet_a: WavePacketSpec,
    packet_b: WavePacketSpec,
    quad_cfg: QuadratureConfig,
}

impl ScenarioInputs {
    pub fn new(accel: f64, n_param: f64, cutoff: f64, quad_cfg: QuadratureConfig) -> Result<Self, OverlapError> {
        let accel = Acceleration::new(accel)?;
        let a = accel.value();
        if !(MIN_ACCEL..=MAX_ACCEL).contains(&a) {
            return Err(OverlapError::DegenerateRegime { accel: a });
        }
        quad_cfg.validate()?;
        let packet_a = WavePacketSpec::new(n_param, cutoff, Direction::Left, -1.0 / a)?;
        let packet_b = WavePacketSpec::new(n_param, cutoff, Direction::Right, 1.0 / a)?;
        if cutoff <= 0.0 {
            return Err(OverlapError::DegenerateConfiguration(
                "a positive infrared cutoff is required (plane waves at l = 0 are singular)".into(),
            ));
        }
        if cutoff >= n_param + ENVELOPE_REACH {
            return Err(OverlapError::DegenerateConfiguration(format!(
                "cutoff {cutoff} lies above the packet support (N + {ENVELOPE_REACH} = {})",
                n_param + ENVELOPE_REACH
            )));
        }
        Ok(Self { accel, packet_a, packet_b, quad_cfg })
    }

    pub fn with_defaults(accel: f64) -> Result<Self, OverlapError> {
        Self::new(accel, WavePacketSpec::DEFAULT_N, WavePacketSpec::DEFAULT_CUTOFF, Self::default_quadrature())
    }

    /// Tolerances used for the overlaps unless the caller overrides them.
    pub fn default_quadrature() -> QuadratureConfig {
        QuadratureConfig { rel_tol: 1e-8, abs_tol: TINY, max_evaluations: 20_000_000, ..QuadratureConfig::default() }
    }

    pub fn accel(&self) -> Acceleration {
        self.accel
    }
    pub fn packet_a(&self) -> &WavePacketSpec {
        &self.packet_a
    }
    pub fn packet_b(&self) -> &WavePacketSpec {
        &self.packet_b
    }
    pub fn quad_cfg(&self) -> &QuadratureConfig {
        &self.quad_cfg
    }
    pub fn cutoff(&self) -> f64 {
        self.packet_b.cutoff
    }
    pub fn n_param(&self) -> f64 {
        self.packet_b.n_param
    }
    /// Upper end of the inner wavenumber integrals.
    pub fn inner_limit(&self) -> f64 {
        self.packet_b.n_param + ENVELOPE_REACH
    }
}

/// Which of the four Rindler spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumKind {
    /// `(w_k, φ_B)`, `k > 0`.
    B,
    /// `(w_k, φ_B*)`, `k > 0`.
    BConj,
    /// `(w_k, φ_A)`, `k < 0`.
    A,
    /// `(w_k, φ_A*)`, `k < 0`.
    AConj,
}

impl SpectrumKind {
    pub const ALL: [SpectrumKind; 4] = [SpectrumKind::B, SpectrumKind::BConj, SpectrumKind::A, SpectrumKind::AConj];

    pub fn label(self) -> &'static str {
        match self {
            SpectrumKind::B => "B",
            SpectrumKind::BConj => "B_conj",
            SpectrumKind::A => "A",
            SpectrumKind::AConj => "A_conj",
        }
    }

    fn conjugated(self) -> bool {
        matches!(self, SpectrumKind::BConj | SpectrumKind::AConj)
    }

    fn positive_k(self) -> bool {
        matches!(self, SpectrumKind::B | SpectrumKind::BConj)
    }
}

/// One evaluated spectrum point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumValue {
    pub k: f64,
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// A normalisation constant and its propagated uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

/// Spectra of one scenario with the packet normalisations already fixed.
#[derive(Debug, Clone)]
pub struct SpectrumEngine {
    inputs: ScenarioInputs,
    norm_a: Normalization,
    norm_b: Normalization,
    inner_cfg: QuadratureConfig,
    /// `ln ∫ E(m) m^{-1/2} dm`, an upper bound on every inner integral.
    log_envelope_mass: f64,
}

/// `N = [∫ |(u_l, φ)|² dl]^{-1/2}` over the cut packet support.
fn packet_normalization(spec: &WavePacketSpec, cfg: &QuadratureConfig) -> Result<Normalization, OverlapError> {
    let sign = spec.direction.sign();
    let weight = |m: f64| {
        let l = sign * m;
        Complex64::new(minkowski_gaussian_overlap(l, spec).map_or(f64::NAN, |g| g.norm_sqr()), 0.0)
    };
    let r = integrate_to_infinity(weight, spec.cutoff, cfg)?;
    let mass = r.value.re;
    if !(mass > TINY) {
        return Err(OverlapError::DegenerateConfiguration(format!(
            "packet norm integral vanishes ({mass:e}); the cutoff {} removes the whole packet",
            spec.cutoff
        )));
    }
    let value = mass.powf(-0.5);
    Ok(Normalization { value, error_estimate: 0.5 * value * r.error_estimate / mass, converged: r.converged })
}

impl SpectrumEngine {
    pub fn new(inputs: &ScenarioInputs) -> Result<Self, OverlapError> {
        let cfg = inputs.quad_cfg;
        let inner_cfg = QuadratureConfig { rel_tol: cfg.rel_tol * INNER_TOL_FACTOR, abs_tol: TINY, ..cfg };
        let norm_a = packet_normalization(&inputs.packet_a, &inner_cfg)?;
        let norm_b = packet_normalization(&inputs.packet_b, &inner_cfg)?;
        let mut engine = Self { inputs: inputs.clone(), norm_a, norm_b, inner_cfg, log_envelope_mass: 0.0 };
        let spec = engine.inputs.packet_b;
        let mass = crate::quadrature::integrate(
            |m| Complex64::new(engine.envelope(&spec, m), 0.0),
            spec.cutoff,
            engine.inputs.inner_limit(),
            &inner_cfg,
        )?;
        engine.log_envelope_mass = mass.value.re.ln();
        engine.inner_cfg.abs_tol = INNER_ROUNDOFF_FLOOR * mass.value.re;
        Ok(engine)
    }

    pub fn inputs(&self) -> &ScenarioInputs {
        &self.inputs
    }
    pub fn norm_a(&self) -> Normalization {
        self.norm_a
    }
    pub fn norm_b(&self) -> Normalization {
        self.norm_b
    }

    /// `|(u_l, φ(x - x₀))| / √|l|` at `|l| = m`, which carries no translation phase.
    fn envelope(&self, spec: &WavePacketSpec, m: f64) -> f64 {
        let l = spec.direction.sign() * m;
        minkowski_gaussian_overlap(l, spec).map_or(f64::NAN, |g| g.norm()) / m.sqrt()
    }

    /// Evaluates one spectrum at `k` (`k > 0` for the B family, `k < 0` for A).
    pub fn spectrum(&self, kind: SpectrumKind, k: f64) -> Result<SpectrumValue, OverlapError> {
        let cutoff = self.inputs.cutoff();
        if kind.positive_k() && !(k >= cutoff) {
            return Err(OverlapError::WrongHalfLine { kind, k, requirement: "k >= cutoff" });
        }
        if !kind.positive_k() && !(k <= -cutoff) {
            return Err(OverlapError::WrongHalfLine { kind, k, requirement: "k <= -cutoff" });
        }
        let a = self.inputs.accel.value();
        let (spec, norm) = if kind.positive_k() {
            (self.inputs.packet_b, self.norm_b.value)
        } else {
            (self.inputs.packet_a, self.norm_a.value)
        };
        // (w_k, u_l) = C(k) |l|^{-1/2} e^{i(k/a) ln|l|} on the matching half-line,
        // and C(k) is the coefficient at |l| = 1.
        let unit = if kind.positive_k() { 1.0 } else { -1.0 };
        let mut log_prefactor = log_bogoliubov(k, unit, self.inputs.accel)?
            .expect("k and l on the same half-line")
            + norm.ln();
        if kind.conjugated() {
            log_prefactor -= PI * k.abs() / a;
        }
        let zero = |converged| SpectrumValue {
            k,
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            evaluations: 0,
            converged,
            diagnostic: None,
        };
        if log_prefactor.re + self.log_envelope_mass < (TINY).ln() {
            return Ok(zero(true));
        }
        // the packet phase e^{-i l x₀} is e^{-im/a} for both packets; conjugation flips it
        let nu = if kind.conjugated() { 1.0 / a } else { -1.0 / a };
        let chirp = LogChirp::new(k / a, nu);
        let r = integrate_log_chirp(
            |m| Complex64::new(self.envelope(&spec, m), 0.0),
            chirp,
            cutoff,
            self.inputs.inner_limit(),
            &self.inner_cfg,
        )?;
        let scale = log_prefactor.exp();
        Ok(SpectrumValue {
            k,
            value: r.value * scale,
            error_estimate: r.error_estimate * scale.norm(),
            evaluations: r.evaluations,
            converged: r.converged,
            diagnostic: r.diagnostic,
        })
    }

    /// Spectrum values on a list of `|k|`; the sign is chosen from `kind`.
    pub fn tabulate(&self, kind: SpectrumKind, magnitudes: &[f64]) -> Result<Vec<SpectrumValue>, OverlapError> {
        use rayon::prelude::*;
        let sign = if kind.positive_k() { 1.0 } else { -1.0 };
        magnitudes.par_iter().map(|&m| self.spectrum(kind, sign * m)).collect()
    }
}

/// `(w_k, φ_B)` at `k ≥ Λ`.
pub fn rindler_spectrum_b(k: f64, inputs: &ScenarioInputs) -> Result<SpectrumValue, OverlapError> {
    SpectrumEngine::new(inputs)?.spectrum(SpectrumKind::B, k)
}

/// `(w_k, φ_B*)` at `k ≥ Λ`.
pub fn rindler_spectrum_b_conj(k: f64, inputs: &ScenarioInputs) -> Result<SpectrumValue, OverlapError> {
    SpectrumEngine::new(inputs)?.spectrum(SpectrumKind::BConj, k)
}

/// `(w_k, φ_A)` at `k ≤ -Λ`.
pub fn rindler_spectrum_a(k: f64, inputs: &ScenarioInputs) -> Result<SpectrumValue, OverlapError> {
    SpectrumEngine::new(inputs)?.spectrum(SpectrumKind::A, k)
}

/// `(w_k, φ_A*)` at `k ≤ -Λ`.
pub fn rindler_spectrum_a_conj(k: f64, inputs: &ScenarioInputs) -> Result<SpectrumValue, OverlapError> {
    SpectrumEngine::new(inputs)?.spectrum(SpectrumKind::AConj, k)
}

/// Outer integrand at one `|k|`: the five products entering the scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OuterSample {
    b_sq: f64,
    b_bconj: Complex64,
    a_sq: f64,
    a_aconj: Complex64,
    /// `n(|k|/a) (|A|² + |B|²)` rescaled by `e^{2πΛ/a}`.
    thermal: f64,
    /// Absolute uncertainty of each component inherited from the inner integrals.
    noise: [f64; 5],
}

impl std::ops::Add for OuterSample {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            b_sq: self.b_sq + o.b_sq,
            b_bconj: self.b_bconj + o.b_bconj,
            a_sq: self.a_sq + o.a_sq,
            a_aconj: self.a_aconj + o.a_aconj,
            thermal: self.thermal + o.thermal,
            noise: std::array::from_fn(|i| self.noise[i] + o.noise[i]),
        }
    }
}

impl std::ops::Sub for OuterSample {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * -1.0
    }
}

impl std::ops::Mul<f64> for OuterSample {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            b_sq: self.b_sq * s,
            b_bconj: self.b_bconj * s,
            a_sq: self.a_sq * s,
            a_aconj: self.a_aconj * s,
            thermal: self.thermal * s,
            noise: self.noise.map(|n| n * s.abs()),
        }
    }
}

impl QuadValue for OuterSample {
    const COMPONENTS: usize = 5;
    fn zero() -> Self {
        Self { b_sq: 0.0, b_bconj: Complex64::new(0.0, 0.0), a_sq: 0.0, a_aconj: Complex64::new(0.0, 0.0), thermal: 0.0, noise: [0.0; 5] }
    }
    fn component_abs(&self, i: usize) -> f64 {
        match i {
            0 => self.b_sq.abs(),
            1 => self.b_bconj.norm(),
            2 => self.a_sq.abs(),
            3 => self.a_aconj.norm(),
            _ => self.thermal.abs(),
        }
    }
    fn component_noise(&self, i: usize) -> f64 {
        self.noise[i]
    }
}

/// Convergence bookkeeping for one `compute_overlaps` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFlags {
    pub norms: bool,
    /// Every inner spectrum integral converged.
    pub inner: bool,
    /// Every outer window converged.
    pub outer: bool,
    /// The doubling windows met the stopping rule before the cap.
    pub tail: bool,
    pub inner_failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl ConvergenceFlags {
    pub fn all(&self) -> bool {
        self.norms && self.inner && self.outer && self.tail
    }
}

/// Error estimates attached to an [`OverlapSet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapErrors {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
    /// Relative error of `n_unruh`.
    pub n_unruh_rel: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_r: f64,
}

/// The scalars that fix both covariance matrices at one acceleration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub accel: f64,
    pub n_param: f64,
    pub cutoff: f64,
    pub alpha: Complex64,
    pub alpha_prime: Complex64,
    pub beta: Complex64,
    pub beta_prime: Complex64,
    pub n_unruh: f64,
    /// `ln n_unruh`, finite even where `n_unruh` underflows.
    pub log_n_unruh: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_r: f64,
    /// Upper end of the last outer window.
    pub k_truncation: f64,
    pub errors: OverlapErrors,
    pub convergence: ConvergenceFlags,
    pub evaluations: usize,
}

impl OverlapSet {
    pub fn converged(&self) -> bool {
        self.convergence.all()
    }

    /// A hand-specified coefficient set, e.g. for limiting cases.
    ///
    /// Normalisations are set to 1 and the set is marked converged.
    pub fn from_coefficients(
        alpha: Complex64,
        alpha_prime: Complex64,
        beta: Complex64,
        beta_prime: Complex64,
        n_unruh: f64,
    ) -> Self {
        Self {
            accel: 0.0,
            n_param: WavePacketSpec::DEFAULT_N,
            cutoff: WavePacketSpec::DEFAULT_CUTOFF,
            alpha,
            alpha_prime,
            beta,
            beta_prime,
            n_unruh,
            log_n_unruh: n_unruh.ln(),
            norm_a: 1.0,
            norm_b: 1.0,
            norm_r: 1.0,
            k_truncation: 0.0,
            errors: OverlapErrors {
                alpha: 0.0,
                alpha_prime: 0.0,
                beta: 0.0,
                beta_prime: 0.0,
                n_unruh_rel: 0.0,
                norm_a: 0.0,
                norm_b: 0.0,
                norm_r: 0.0,
            },
            convergence: ConvergenceFlags {
                norms: true,
                inner: true,
                outer: true,
                tail: true,
                inner_failures: 0,
                diagnostics: Vec::new(),
            },
            evaluations: 0,
        }
    }
}

#[derive(Default)]
struct InnerLog {
    failures: usize,
    evaluations: usize,
    /// Diagnostic at the smallest failing `k`, so the report does not depend on scheduling.
    first: Option<(f64, String)>,
    error: Option<(f64, OverlapError)>,
}

fn outer_sample(engine: &SpectrumEngine, k: f64, log: &Mutex<InnerLog>) -> OuterSample {
    let a = engine.inputs.accel.value();
    let cutoff = engine.inputs.cutoff();
    let mut values = [Complex64::new(0.0, 0.0); 4];
    let mut errs = [0.0; 4];
    for ((slot, err), kind) in values.iter_mut().zip(errs.iter_mut()).zip(SpectrumKind::ALL) {
        let signed = if kind.positive_k() { k } else { -k };
        match engine.spectrum(kind, signed) {
            Ok(v) => {
                let mut log = log.lock().unwrap();
                log.evaluations += v.evaluations;
                if !v.converged {
                    log.failures += 1;
                    if log.first.as_ref().map_or(true, |(k0, _)| k < *k0) {
                        let why = v.diagnostic.clone().unwrap_or_default();
                        log.first = Some((k, format!("{} spectrum at k = {k:e}: {why}", kind.label())));
                    }
                }
                *slot = v.value;
                *err = v.error_estimate;
            }
            Err(e) => {
                let mut log = log.lock().unwrap();
                if log.error.as_ref().map_or(true, |(k0, _)| k < *k0) {
                    log.error = Some((k, e));
                }
                *slot = Complex64::new(f64::NAN, f64::NAN);
            }
        }
    }
    let [b, b_conj, a_val, a_conj] = values;
    let [db, db_conj, da, da_conj] = errs;
    let weight = unruh_occupation_scaled(RindlerFrequency::from_wavenumber(k, a).expect("k > 0"), cutoff / a);
    let square_noise = |v: Complex64, d: f64| d * (2.0 * v.norm() + d);
    let product_noise = |u: Complex64, du: f64, v: Complex64, dv: f64| u.norm() * dv + v.norm() * du + du * dv;
    let (noise_b, noise_a) = (square_noise(b, db), square_noise(a_val, da));
    OuterSample {
        b_sq: b.norm_sqr(),
        b_bconj: b.conj() * b_conj,
        a_sq: a_val.norm_sqr(),
        a_aconj: a_val.conj() * a_conj,
        thermal: weight * (a_val.norm_sqr() + b.norm_sqr()),
        noise: [
            noise_b,
            product_noise(b, db, b_conj, db_conj),
            noise_a,
            product_noise(a_val, da, a_conj, da_conj),
            weight * (noise_a + noise_b),
        ],
    }
}

/// Computes `α, α', β, β', ⟨n⟩_U` and the normalisations for one scenario.
///
/// Quadrature shortfalls clear the convergence flags instead of failing;
/// invalid inputs, non-finite integrands and refused regimes are errors.
pub fn compute_overlaps(inputs: &ScenarioInputs) -> Result<OverlapSet, OverlapError> {
    let engine = SpectrumEngine::new(inputs)?;
    compute_overlaps_with(&engine)
}

pub fn compute_overlaps_with(engine: &SpectrumEngine) -> Result<OverlapSet, OverlapError> {
    let inputs = &engine.inputs;
    let cfg = inputs.quad_cfg;
    let a = inputs.accel.value();
    let cutoff = inputs.cutoff();
    let log = Mutex::new(InnerLog::default());
    let integrand = |k: f64| outer_sample(engine, k, &log);

    let take_error = |e: QuadratureError, log: &Mutex<InnerLog>| -> OverlapError {
        match log.lock().unwrap().error.take() {
            Some((_, inner)) => inner,
            None => OverlapError::Quadrature(e),
        }
    };

    let first_hi = 2.0 * inputs.inner_limit();
    let first_breaks: Vec<f64> = (0..=FIRST_WINDOW_PANELS)
        .map(|i| cutoff + (first_hi - cutoff) * i as f64 / FIRST_WINDOW_PANELS as f64)
        .collect();
    let tol = ComponentTolerance { rel_tol: cfg.rel_tol, abs_tol: vec![TINY] };
    let first = integrate_vector(&integrand, &first_breaks, &tol, &cfg).map_err(|e| take_error(e, &log))?;

    let mut total = first.value;
    let mut errors = first.errors.clone();
    let mut evaluations = first.evaluations;
    let mut outer_ok = first.converged;
    let mut diagnostics = Vec::new();
    if let Some(d) = first.diagnostic {
        diagnostics.push(format!("outer window [{cutoff}, {first_hi}]: {d}"));
    }

    let mut lo = first_hi;
    let mut tail_ok = false;
    for _ in 0..MAX_WINDOWS {
        let hi = 2.0 * lo;
        let breaks: Vec<f64> = (0..=WINDOW_PANELS).map(|i| lo * (hi / lo).powf(i as f64 / WINDOW_PANELS as f64)).collect();
        let abs_tol: Vec<f64> = (0..OuterSample::COMPONENTS)
            .map(|c| (WINDOW_STOP_FRACTION * cfg.rel_tol * total.component_abs(c)).max(TINY))
            .collect();
        let window_tol = ComponentTolerance { rel_tol: cfg.rel_tol, abs_tol: abs_tol.clone() };
        let budget_left = cfg.max_evaluations.saturating_sub(evaluations);
        if budget_left < 21 * WINDOW_PANELS {
            diagnostics.push(format!("outer evaluation budget exhausted at k = {lo:e}"));
            break;
        }
        let window_cfg = QuadratureConfig { max_evaluations: budget_left, ..cfg };
        let w = integrate_vector(&integrand, &breaks, &window_tol, &window_cfg).map_err(|e| take_error(e, &log))?;
        evaluations += w.evaluations;
        if !w.converged {
            outer_ok = false;
            if let Some(d) = w.diagnostic {
                diagnostics.push(format!("outer window [{lo:e}, {hi:e}]: {d}"));
            }
        }
        let small = (0..OuterSample::COMPONENTS).all(|c| w.value.component_abs(c) <= abs_tol[c]);
        total = total + w.value;
        for (e, we) in errors.iter_mut().zip(&w.errors) {
            *e += we;
        }
        lo = hi;
        if small {
            // the next window would add about as much again; count it as error
            for (c, e) in errors.iter_mut().enumerate() {
                *e += w.value.component_abs(c);
            }
            tail_ok = true;
            break;
        }
    }
    if !tail_ok {
        diagnostics.push(format!("outer integrals still growing at k = {lo:e}"));
    }

    let inner = log.into_inner().unwrap();
    if let Some((k, d)) = inner.first {
        diagnostics.push(format!("{} unconverged inner integrals; first at k = {k:e}: {d}", inner.failures));
    }

    let mass = total.a_sq + total.b_sq;
    if !(mass > TINY) {
        return Err(OverlapError::DegenerateConfiguration(format!("detector mode norm integral vanishes ({mass:e})")));
    }
    let norm_r = mass.powf(-0.5);
    let rel_norm_r = 0.5 * (errors[0] + errors[2]) / mass;
    let beta = norm_r * total.b_sq;
    let alpha = norm_r * total.a_sq;
    let beta_prime = total.b_bconj * norm_r;
    let alpha_prime = total.a_aconj * norm_r;
    let log_n_unruh = 2.0 * norm_r.ln() - 2.0 * PI * cutoff / a + total.thermal.ln();

    let errs = OverlapErrors {
        alpha: norm_r * errors[2] + alpha * rel_norm_r,
        alpha_prime: norm_r * errors[3] + alpha_prime.norm() * rel_norm_r,
        beta: norm_r * errors[0] + beta * rel_norm_r,
        beta_prime: norm_r * errors[1] + beta_prime.norm() * rel_norm_r,
        n_unruh_rel: errors[4] / total.thermal.max(TINY) + 2.0 * rel_norm_r,
        norm_a: engine.norm_a.error_estimate,
        norm_b: engine.norm_b.error_estimate,
        norm_r: norm_r * rel_norm_r,
    };

    Ok(OverlapSet {
        accel: a,
        n_param: inputs.n_param(),
        cutoff,
        alpha: Complex64::new(alpha, 0.0),
        alpha_prime,
        beta: Complex64::new(beta, 0.0),
        beta_prime,
        n_unruh: log_n_unruh.exp(),
        log_n_unruh,
        norm_a: engine.norm_a.value,
        norm_b: engine.norm_b.value,
        norm_r,
        k_truncation: lo,
        errors: errs,
        convergence: ConvergenceFlags {
            norms: engine.norm_a.converged && engine.norm_b.converged,
            inner: inner.failures == 0,
            outer: outer_ok,
            tail: tail_ok,
            inner_failures: inner.failures,
            diagnostics,
        },
        evaluations: evaluations + inner.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::bogoliubov;

    fn inputs(a: f64) -> ScenarioInputs {
        ScenarioInputs::with_defaults(a).unwrap()
    }

    /// Brute-force spectrum: trapezoid over the packet support with the
    /// closed-form packet overlap and Bogoliubov coefficient per node.
    fn dense_spectrum(kind: SpectrumKind, k: f64, inp: &ScenarioInputs, norm: f64, points: usize) -> Complex64 {
        let accel = inp.accel();
        let (lo, hi) = (inp.cutoff(), inp.inner_limit());
        let h = (hi - lo) / (points - 1) as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..points {
            let m = lo + h * j as f64;
            let (l, packet) = if kind.positive_k() { (m, inp.packet_b()) } else { (-m, inp.packet_a()) };
            let g = minkowski_gaussian_overlap(l, packet).unwrap();
            let term = if kind.conjugated() {
                g.conj() * crate::modes::bogoliubov_conjugate(k, l, accel).unwrap()
            } else {
                g * bogoliubov(k, l, accel).unwrap()
            };
            let w = if j == 0 || j == points - 1 { 0.5 } else { 1.0 };
            acc += term * w;
        }
        acc * h * norm
    }

    #[test]
    fn spectrum_b_matches_dense_grid() {
        let inp = inputs(0.1);
        let eng = SpectrumEngine::new(&inp).unwrap();
        let v = eng.spectrum(SpectrumKind::B, 0.5).unwrap();
        let d = dense_spectrum(SpectrumKind::B, 0.5, &inp, eng.norm_b().value, 1_000_000);
        assert!(v.converged);
        assert!((v.value - d).norm() <= 1e-6 * d.norm(), "{} vs {d}", v.value);
    }

    #[test]
    fn spectrum_b_conj_matches_dense_grid() {
        let inp = inputs(0.2);
        let eng = SpectrumEngine::new(&inp).unwrap();
        let v = eng.spectrum(SpectrumKind::BConj, 0.6).unwrap();
        let d = dense_spectrum(SpectrumKind::BConj, 0.6, &inp, eng.norm_b().value, 1_000_000);
        assert!((v.value - d).norm() <= 1e-6 * d.norm(), "{} vs {d}", v.value);
    }

    #[test]
    fn spectrum_a_matches_dense_grid() {
        let inp = inputs(0.5);
        let eng = SpectrumEngine::new(&inp).unwrap();
        let v = eng.spectrum(SpectrumKind::A, -0.7).unwrap();
        let d = dense_spectrum(SpectrumKind::A, -0.7, &inp, eng.norm_a().value, 1_000_000);
        assert!((v.value - d).norm() <= 1e-6 * d.norm(), "{} vs {d}", v.value);
    }

    #[test]
    fn spectrum_a_conj_matches_dense_grid() {
        let inp = inputs(0.5);
        let eng = SpectrumEngine::new(&inp).unwrap();
        let v = eng.spectrum(SpectrumKind::AConj, -0.7).unwrap();
        let d = dense_spectrum(SpectrumKind::AConj, -0.7, &inp, eng.norm_a().value, 1_000_000);
        assert!((v.value - d).norm() <= 1e-6 * d.norm(), "{} vs {d}", v.value);
    }

    #[test]
    fn half_line_preconditions() {
        let eng = SpectrumEngine::new(&inputs(1.0)).unwrap();
        assert!(matches!(eng.spectrum(SpectrumKind::B, -1.0), Err(OverlapError::WrongHalfLine { .. })));
        assert!(matches!(eng.spectrum(SpectrumKind::A, 1.0), Err(OverlapError::WrongHalfLine { .. })));
        assert!(matches!(eng.spectrum(SpectrumKind::BConj, 0.2), Err(OverlapError::WrongHalfLine { .. })));
    }

    #[test]
    fn norms_independent_of_translation_and_equal() {
        let e1 = SpectrumEngine::new(&inputs(0.3)).unwrap();
        let e2 = SpectrumEngine::new(&inputs(30.0)).unwrap();
        assert!((e1.norm_b().value - e2.norm_b().value).abs() < 1e-13);
        assert!((e1.norm_a().value - e1.norm_b().value).abs() < 1e-13);
    }

    #[test]
    fn regime_and_configuration_refusals() {
        assert!(matches!(ScenarioInputs::with_defaults(2e3), Err(OverlapError::DegenerateRegime { .. })));
        assert!(matches!(ScenarioInputs::with_defaults(1e-5), Err(OverlapError::DegenerateRegime { .. })));
        let cfg = ScenarioInputs::default_quadrature();
        assert!(matches!(ScenarioInputs::new(1.0, 6.0, 30.0, cfg), Err(OverlapError::DegenerateConfiguration(_))));
        assert!(matches!(ScenarioInputs::new(1.0, 6.0, 0.0, cfg), Err(OverlapError::DegenerateConfiguration(_))));
    }

    #[test]
    fn conjugate_spectra_vanish_when_prefactor_underflows() {
        let eng = SpectrumEngine::new(&inputs(1e-3)).unwrap();
        let v = eng.spectrum(SpectrumKind::BConj, 5.0).unwrap();
        assert_eq!(v.value, Complex64::new(0.0, 0.0));
        assert!(v.converged);
    }
}
