//! Closed-form overlaps between plane waves, Gaussian packets and Rindler modes.
//!
//! Units: `c = L = 1`. Minkowski plane waves `u_l` carry wavenumber `l`
//! (positive for right-movers); region-I Rindler modes `w_k` carry `k` with
//! the same convention.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{log_gamma, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModesError {
    #[error("wavenumber must be nonzero (got k = {k}, l = {l})")]
    ZeroWavenumber { k: f64, l: f64 },
    #[error("invalid wave packet: {0}")]
    InvalidPacket(String),
    #[error("acceleration must be positive and finite, got {0}")]
    InvalidAcceleration(f64),
    #[error(transparent)]
    Special(#[from] SpecfunError),
}

/// Dominant propagation direction of a packet's plane-wave content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    /// `+1` for right-movers, `-1` for left-movers.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

/// Gaussian packet `exp(-(x-x₀)² ± iN(x-x₀)) / √(N√(2π))` with an infrared cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    /// Central wavenumber `N` (units of `1/L`).
    pub n_param: f64,
    /// Plane waves with `|l| < cutoff` are removed.
    pub cutoff: f64,
    pub direction: Direction,
    /// Centre `x₀` of the envelope at `t = 0`.
    pub center: f64,
}

impl WavePacketSpec {
    pub const DEFAULT_N: f64 = 6.0;
    pub const DEFAULT_CUTOFF: f64 = 0.5;

    pub fn new(n_param: f64, cutoff: f64, direction: Direction, center: f64) -> Result<Self, ModesError> {
        let spec = Self { n_param, cutoff, direction, center };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_defaults(direction: Direction, center: f64) -> Self {
        Self { n_param: Self::DEFAULT_N, cutoff: Self::DEFAULT_CUTOFF, direction, center }
    }

    pub fn validate(&self) -> Result<(), ModesError> {
        if !(self.n_param > 0.0 && self.n_param.is_finite()) {
            return Err(ModesError::InvalidPacket(format!("n_param must be positive, got {}", self.n_param)));
        }
        if !(self.cutoff >= 0.0 && self.cutoff.is_finite()) {
            return Err(ModesError::InvalidPacket(format!("cutoff must be nonnegative, got {}", self.cutoff)));
        }
        if !self.center.is_finite() {
            return Err(ModesError::InvalidPacket(format!("center must be finite, got {}", self.center)));
        }
        Ok(())
    }
}

/// Dimensionless proper acceleration `aL/c²`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Acceleration(f64);

impl Acceleration {
    pub fn new(a: f64) -> Result<Self, ModesError> {
        if a > 0.0 && a.is_finite() {
            Ok(Self(a))
        } else {
            Err(ModesError::InvalidAcceleration(a))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Acceleration {
    type Error = ModesError;
    fn try_from(a: f64) -> Result<Self, ModesError> {
        Self::new(a)
    }
}

impl From<Acceleration> for f64 {
    fn from(a: Acceleration) -> f64 {
        a.0
    }
}

/// Klein–Gordon product `(u_l, φ_±(x - x₀))` of a plane wave with the uncut packet.
///
/// The exponent uses `l - N` for right-movers and `l + N` for left-movers.
pub fn minkowski_gaussian_overlap(l: f64, spec: &WavePacketSpec) -> Result<Complex64, ModesError> {
    if l == 0.0 || !l.is_finite() {
        return Err(ModesError::ZeroWavenumber { k: f64::NAN, l });
    }
    let n = spec.n_param;
    let m = l.abs();
    let detune = l - spec.direction.sign() * n;
    let amplitude = (n + m) / (2.0 * (m * n * (2.0 * PI).sqrt()).sqrt());
    let envelope = (-detune * detune / 4.0).exp();
    Ok(Complex64::from_polar(amplitude * envelope, -l * spec.center))
}

/// Natural log of `(w_k, u_l)`, or `None` when the coefficient vanishes
/// because `k` and `l` move in opposite directions.
///
/// `(w_k, u_l) = (i/4π) e^{πk/2a} |kl|^{-1/2} (l/a)^{ik/a} (sgn k + sgn l) Γ(1 - ik/a)`
/// with the principal branch of `(l/a)^{ik/a}`: for left-movers `arg(l/a) = π`
/// contributes `e^{π|k|/a}`, which makes `(w_{-k}, u_{-l})` the complex
/// conjugate of `(w_k, u_l)`.
pub fn log_bogoliubov(k: f64, l: f64, accel: Acceleration) -> Result<Option<Complex64>, ModesError> {
    if k == 0.0 || l == 0.0 || !k.is_finite() || !l.is_finite() {
        return Err(ModesError::ZeroWavenumber { k, l });
    }
    if k.signum() != l.signum() {
        return Ok(None);
    }
    let a = accel.value();
    let kappa = k / a;
    let log_ratio = Complex64::new((l.abs() / a).ln(), if l < 0.0 { PI } else { 0.0 });
    let i = Complex64::i();
    // i · (sgn k + sgn l) = ±2i
    let log_sign_factor = Complex64::new(2.0f64.ln(), if k > 0.0 { PI / 2.0 } else { -PI / 2.0 });
    let log_value = Complex64::new(PI * kappa / 2.0 - (4.0 * PI).ln() - 0.5 * (k * l).abs().ln(), 0.0)
        + log_sign_factor
        + i * kappa * log_ratio
        + log_gamma(Complex64::new(1.0, -kappa))?;
    Ok(Some(log_value))
}

/// Bogoliubov coefficient `(w_k, u_l)`; exactly zero for opposite signs.
pub fn bogoliubov(k: f64, l: f64, accel: Acceleration) -> Result<Complex64, ModesError> {
    Ok(log_bogoliubov(k, l, accel)?.map_or(Complex64::new(0.0, 0.0), |z| z.exp()))
}

/// `(w_k, u_l*) = e^{-π|k|/a} (w_k, u_l)`.
pub fn bogoliubov_conjugate(k: f64, l: f64, accel: Acceleration) -> Result<Complex64, ModesError> {
    let damping = -PI * k.abs() / accel.value();
    Ok(log_bogoliubov(k, l, accel)?.map_or(Complex64::new(0.0, 0.0), |z| (z + damping).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn accel(a: f64) -> Acceleration {
        Acceleration::new(a).unwrap()
    }

    /// `(u_l, φ)` from the Klein–Gordon product at t = 0, trapezoid on a dense x-grid.
    ///
    /// With `u_l = e^{ilx}/√(4π|l|)`, `∂ₜu_l = -i|l|u_l`, `∂ₜφ = -iNφ`:
    /// `(u_l, φ) = (N + |l|) ∫ u_l* φ dx`.
    fn kg_product_dense(l: f64, spec: &WavePacketSpec, points: usize) -> Complex64 {
        let n = spec.n_param;
        let s = spec.direction.sign();
        let half = 9.0;
        let (lo, hi) = (spec.center - half, spec.center + half);
        let h = (hi - lo) / (points - 1) as f64;
        let norm = 1.0 / (n * (2.0 * PI).sqrt()).sqrt();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..points {
            let x = lo + h * j as f64;
            let y = x - spec.center;
            let phi = Complex64::from_polar(norm * (-y * y).exp(), s * n * y);
            let u_conj = Complex64::from_polar(1.0 / (4.0 * PI * l.abs()).sqrt(), -l * x);
            let w = if j == 0 || j == points - 1 { 0.5 } else { 1.0 };
            acc += u_conj * phi * w;
        }
        acc * h * (n + l.abs())
    }

    #[test]
    fn overlap_peak_value() {
        let spec = WavePacketSpec::with_defaults(Direction::Right, 0.0);
        let v = minkowski_gaussian_overlap(6.0, &spec).unwrap();
        assert!((v.re - (2.0 * PI).powf(-0.25)).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
        let left = WavePacketSpec::with_defaults(Direction::Left, 0.0);
        let w = minkowski_gaussian_overlap(-6.0, &left).unwrap();
        assert!((w.re - (2.0 * PI).powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn translation_only_changes_phase() {
        let base = WavePacketSpec::with_defaults(Direction::Right, 0.0);
        let moved = WavePacketSpec { center: 2.7, ..base };
        for l in [0.5, 3.0, 6.0, 11.0] {
            let a = minkowski_gaussian_overlap(l, &base).unwrap();
            let b = minkowski_gaussian_overlap(l, &moved).unwrap();
            assert!((a.norm() - b.norm()).abs() < 1e-15);
            assert!((b / a - Complex64::cis(-l * 2.7)).norm() < 1e-13);
        }
    }

    #[test]
    fn overlap_rejects_zero_wavenumber() {
        let spec = WavePacketSpec::with_defaults(Direction::Right, 0.0);
        assert!(matches!(minkowski_gaussian_overlap(0.0, &spec), Err(ModesError::ZeroWavenumber { .. })));
    }

    #[test]
    fn overlap_matches_kg_product_reference_point() {
        let spec = WavePacketSpec::with_defaults(Direction::Right, 1.0 / 0.5);
        let closed = minkowski_gaussian_overlap(3.0, &spec).unwrap();
        let dense = kg_product_dense(3.0, &spec, 200_001);
        assert!((closed - dense).norm() <= 1e-6 * closed.norm(), "{closed} vs {dense}");
    }

    #[test]
    fn overlap_matches_kg_product_random_pairs() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        for _ in 0..10 {
            let direction = if rng.gen_bool(0.5) { Direction::Right } else { Direction::Left };
            let n = rng.gen_range(2.0..10.0);
            let spec = WavePacketSpec::new(n, 0.5, direction, rng.gen_range(-20.0..20.0)).unwrap();
            // stay within a few envelope widths so the value is not itself tiny
            let l = direction.sign() * (n + rng.gen_range(-3.0..3.0)).max(0.3);
            let closed = minkowski_gaussian_overlap(l, &spec).unwrap();
            let dense = kg_product_dense(l, &spec, 200_001);
            assert!((closed - dense).norm() <= 1e-6 * closed.norm(), "l={l} spec={spec:?}: {closed} vs {dense}");
        }
    }

    #[test]
    fn opposite_signs_give_bitwise_zero() {
        for (k, l) in [(2.0, -3.0), (-0.1, 7.0), (5e3, -1e-3)] {
            for a in [1e-3, 1.0, 100.0] {
                let b = bogoliubov(k, l, accel(a)).unwrap();
                assert_eq!(b.re.to_bits(), 0);
                assert_eq!(b.im.to_bits(), 0);
                let c = bogoliubov_conjugate(k, l, accel(a)).unwrap();
                assert_eq!((c.re.to_bits(), c.im.to_bits()), (0, 0));
            }
        }
    }

    #[test]
    fn zero_wavenumbers_rejected() {
        assert!(bogoliubov(0.0, 1.0, accel(1.0)).is_err());
        assert!(bogoliubov(1.0, 0.0, accel(1.0)).is_err());
        assert!(bogoliubov_conjugate(0.0, 1.0, accel(1.0)).is_err());
    }

    #[test]
    fn modulus_squared_closed_form() {
        // |Γ(1 - iy)|² = πy / sinh(πy), so |(w,u)|² = e^{πk/a} (πk/a)/sinh(πk/a) / (4π² k l)
        for &(k, l, a) in &[(1.0, 2.0, 0.5), (0.7, 6.0, 3.0), (4.0, 0.6, 10.0), (2.5, 9.0, 1.7)] {
            let y = PI * k / a;
            let expected = y.exp() * y / y.sinh() / (4.0 * PI * PI * k * l);
            let got = bogoliubov(k, l, accel(a)).unwrap().norm_sqr();
            assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
        }
    }

    #[test]
    fn log_phase_equals_rindler_frequency() {
        // at l = e·a the (l/a)^{ik/a} factor contributes phase k/a exactly
        let a = 0.8;
        let k = 1.0;
        let e = std::f64::consts::E;
        let full = bogoliubov(k, e * a, accel(a)).unwrap();
        let at_unit = bogoliubov(k, a, accel(a)).unwrap() * (1.0 / e).sqrt();
        let ratio = full / at_unit;
        assert!((ratio - Complex64::cis(k / a)).norm() < 1e-13);
    }

    #[test]
    fn conjugate_ratio() {
        for &(k, l, a) in &[(1.0, 2.0, 0.5), (-1.3, -0.4, 2.0), (0.9, 0.9, 0.9)] {
            let r = bogoliubov_conjugate(k, l, accel(a)).unwrap() / bogoliubov(k, l, accel(a)).unwrap();
            assert!((r - (-PI * k.abs() / a).exp()).norm() < 1e-13);
        }
        let r = bogoliubov_conjugate(0.9, 3.0, accel(0.9)).unwrap() / bogoliubov(0.9, 3.0, accel(0.9)).unwrap();
        assert!((r.re - (-PI).exp()).abs() < 1e-14);
    }

    #[test]
    fn left_movers_are_conjugate_mirror() {
        // principal branch: (w_{-k}, u_{-l}) = conj((w_k, u_l))
        for &(k, l, a) in &[(0.5, 3.0, 1.0), (2.0, 7.0, 4.0)] {
            let right = bogoliubov(k, l, accel(a)).unwrap();
            let left = bogoliubov(-k, -l, accel(a)).unwrap();
            let expected = right.conj();
            assert!((left - expected).norm() <= 1e-12 * right.norm());
        }
    }

    #[test]
    fn large_rindler_frequency_stays_finite() {
        // e^{πk/2a} alone overflows here; the product with Γ does not
        let v = bogoliubov(20.0, 6.0, accel(1e-3)).unwrap();
        assert!(v.re.is_finite() && v.im.is_finite() && v.norm() > 0.0);
        let c = bogoliubov_conjugate(20.0, 6.0, accel(1e-3)).unwrap();
        assert!(c.re.is_finite() && c.im.is_finite());
        assert!(c.norm() < 1e-300);
    }

    #[test]
    fn continuity_and_scaling_in_l() {
        // finite-difference probe: |(w,u)|·√l is independent of l and the phase is k/a·ln l
        let (k, a) = (1.5, 2.0);
        let probe = |l: f64| bogoliubov(k, l, accel(a)).unwrap();
        let base = probe(3.0).norm() * 3.0f64.sqrt();
        for l in [0.5, 1.0, 4.0, 17.0] {
            assert!((probe(l).norm() * l.sqrt() - base).abs() < 1e-13 * base);
            let h = 1e-6 * l;
            let dphase = (probe(l + h) / probe(l - h)).arg() / (2.0 * h);
            assert!((dphase - k / a / l).abs() < 1e-6 * k / a / l);
        }
    }

    #[test]
    fn packet_and_acceleration_validation() {
        assert!(WavePacketSpec::new(0.0, 0.5, Direction::Right, 0.0).is_err());
        assert!(WavePacketSpec::new(6.0, -0.1, Direction::Right, 0.0).is_err());
        assert!(WavePacketSpec::new(6.0, 0.5, Direction::Left, f64::NAN).is_err());
        assert!(Acceleration::new(0.0).is_err());
        assert!(Acceleration::new(-1.0).is_err());
        assert_eq!(Acceleration::new(2.0).unwrap().value(), 2.0);
    }
}
