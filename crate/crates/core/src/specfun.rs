//! Special functions needed by the mode overlaps and thermal weights.
//!
//! Only three functions are provided: a complex log-gamma good for the
//! line `1 - iy` (and in practice the whole right half-plane), the
//! Bose–Einstein occupation of a Rindler frequency, and the two-wedge
//! squeezing parameter tied to it by `sinh²(r) = n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("log_gamma: pole of Gamma at z = {0}")]
    GammaPole(f64),
    #[error("log_gamma: non-finite argument {0}")]
    NonFinite(Complex64),
    #[error("Rindler frequency must be positive and finite, got {0}")]
    NonPositiveFrequency(f64),
}

/// Dimensionless Rindler frequency `Ω = |k| c² / a`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RindlerFrequency(f64);

impl RindlerFrequency {
    pub fn new(omega: f64) -> Result<Self, SpecfunError> {
        if omega > 0.0 && omega.is_finite() {
            Ok(Self(omega))
        } else {
            Err(SpecfunError::NonPositiveFrequency(omega))
        }
    }

    /// `Ω = |k| / a` in `c = 1` units.
    pub fn from_wavenumber(k: f64, accel: f64) -> Result<Self, SpecfunError> {
        Self::new(k.abs() / accel)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

// B_{2j} / (2j (2j - 1)), j = 1..=10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

/// Below this modulus the argument is shifted up before the asymptotic series.
const STIRLING_MIN_ABS: f64 = 16.0;

/// Complex log-gamma.
///
/// The imaginary part follows the analytic continuation along the
/// recurrence rather than the principal value of `log Γ(z)`; both
/// exponentiate to `Γ(z)`, which is all the callers rely on.
pub fn log_gamma(z: Complex64) -> Result<Complex64, SpecfunError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SpecfunError::NonFinite(z));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(SpecfunError::GammaPole(z.re));
    }
    if z.re < 0.5 {
        // Γ(z) Γ(1 - z) = π / sin(πz)
        let reflected = log_gamma_right(Complex64::new(1.0, 0.0) - z);
        return Ok(Complex64::new(PI.ln(), 0.0) - log_sin_pi(z) - reflected);
    }
    Ok(log_gamma_right(z))
}

fn log_gamma_right(z: Complex64) -> Complex64 {
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.norm() < STIRLING_MIN_ABS {
        shift += z.ln();
        z += 1.0;
    }
    stirling(z) - shift
}

fn stirling(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series
}

/// `log(sin(πz))` without overflowing for large `|Im z|`.
fn log_sin_pi(z: Complex64) -> Complex64 {
    let w = z * PI;
    let i = Complex64::i();
    if w.im > 20.0 {
        // sin w = (i/2) e^{-iw} (1 - e^{2iw})
        -i * w + Complex64::new(0.5, 0.0).ln() + Complex64::new(0.0, PI / 2.0)
            + (Complex64::new(1.0, 0.0) - (2.0 * i * w).exp()).ln()
    } else if w.im < -20.0 {
        // sin w = (-i/2) e^{iw} (1 - e^{-2iw})
        i * w + Complex64::new(0.5, 0.0).ln() - Complex64::new(0.0, PI / 2.0)
            + (Complex64::new(1.0, 0.0) - (-2.0 * i * w).exp()).ln()
    } else {
        w.sin().ln()
    }
}

/// Bose–Einstein occupation `1 / (e^{2πΩ} - 1)` of a Rindler frequency.
pub fn unruh_occupation(omega: RindlerFrequency) -> f64 {
    (2.0 * PI * omega.0).exp_m1().recip()
}

/// Occupation rescaled by `e^{2π Ω_ref}`, i.e. `e^{-2π(Ω - Ω_ref)} / (1 - e^{-2πΩ})`.
///
/// Stays representable when `Ω` is so large that the plain occupation
/// underflows; `ln n(Ω) = ln(scaled) - 2π Ω_ref`.
pub fn unruh_occupation_scaled(omega: RindlerFrequency, omega_ref: f64) -> f64 {
    let w = omega.0;
    (-2.0 * PI * (w - omega_ref)).exp() / -(-2.0 * PI * w).exp_m1()
}

/// Two-wedge squeezing `r_Ω = artanh(e^{-πΩ})`.
pub fn rindler_squeezing(omega: RindlerFrequency) -> f64 {
    let x = (-PI * omega.0).exp();
    // artanh x = ½ ln(1 + 2x / (1 - x)), with 1 - x from expm1
    let one_minus_x = -(-PI * omega.0).exp_m1();
    0.5 * (2.0 * x / one_minus_x).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn log_gamma_identity_points() {
        assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-14);
        assert!(log_gamma(c(2.0, 0.0)).unwrap().norm() < 1e-14);
        let lg = log_gamma(c(1.0, -1.0)).unwrap();
        let expected = PI / PI.sinh(); // 0.272029...
        assert!(rel((2.0 * lg.re).exp(), expected) < 1e-13);
        assert!((expected - 0.272029).abs() < 1e-6);
    }

    #[test]
    fn log_gamma_real_factorials() {
        let mut fact = 1.0f64;
        for n in 1..25 {
            let lg = log_gamma(c(n as f64, 0.0)).unwrap();
            assert!((lg.re - fact.ln()).abs() < 1e-12 * fact.ln().abs().max(1.0), "n={n}");
            assert!(lg.im.abs() < 1e-12);
            fact *= n as f64;
        }
        // Γ(1/2) = √π
        let half = log_gamma(c(0.5, 0.0)).unwrap();
        assert!((half.re - 0.5 * PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_gamma_poles_rejected() {
        for z in [0.0, -1.0, -7.0] {
            assert_eq!(log_gamma(c(z, 0.0)), Err(SpecfunError::GammaPole(z)));
        }
        assert!(log_gamma(c(-1.0, 1e-3)).is_ok());
        assert!(matches!(log_gamma(c(f64::NAN, 0.0)), Err(SpecfunError::NonFinite(_))));
    }

    #[test]
    fn log_gamma_reflection_matches_recurrence() {
        // Γ(z+1) = z Γ(z) across the reflection boundary
        for &(re, im) in &[(-0.3, 0.7), (-2.5, 3.0), (0.2, -40.0), (-1.5, 25.0)] {
            let z = c(re, im);
            let lhs = log_gamma(z + 1.0).unwrap();
            let rhs = log_gamma(z).unwrap() + z.ln();
            let d = (lhs - rhs).exp();
            assert!((d - 1.0).norm() < 1e-11, "z={z} d={d}");
        }
    }

    #[test]
    fn occupation_closed_forms() {
        let w = RindlerFrequency::new(2.0f64.ln() / (2.0 * PI)).unwrap();
        assert!((unruh_occupation(w) - 1.0).abs() < 1e-14);
        let one = RindlerFrequency::new(1.0).unwrap();
        let direct = 1.0 / ((2.0 * PI).exp() - 1.0);
        assert!(rel(unruh_occupation(one), direct) < 1e-14);
        assert_eq!(unruh_occupation(RindlerFrequency::new(1e3).unwrap()), 0.0);
        assert!(unruh_occupation(RindlerFrequency::new(200.0).unwrap()) < 1e-300);
    }

    #[test]
    fn occupation_rejects_nonpositive() {
        assert!(RindlerFrequency::new(0.0).is_err());
        assert!(RindlerFrequency::new(-1.0).is_err());
        assert!(RindlerFrequency::new(f64::INFINITY).is_err());
    }

    #[test]
    fn scaled_occupation_consistent() {
        for &w in &[0.05, 0.7, 3.0] {
            let omega = RindlerFrequency::new(w).unwrap();
            let scaled = unruh_occupation_scaled(omega, 0.5);
            let plain = unruh_occupation(omega);
            assert!(rel(scaled * (-PI).exp(), plain) < 1e-13);
        }
        // far beyond underflow of the plain value
        let omega = RindlerFrequency::new(500.0).unwrap();
        let s = unruh_occupation_scaled(omega, 499.9);
        assert!(rel(s, (-2.0 * PI * 0.1f64).exp()) < 1e-10);
    }

    #[test]
    fn squeezing_values() {
        let half = RindlerFrequency::new(0.5).unwrap();
        let direct = (-PI / 2.0).exp().atanh();
        assert!(rel(rindler_squeezing(half), direct) < 1e-14);
        assert!(rindler_squeezing(RindlerFrequency::new(50.0).unwrap()) < 1e-60);
        for &w in &[0.1, 1.0, 5.0] {
            let om = RindlerFrequency::new(w).unwrap();
            let r = rindler_squeezing(om);
            assert!(rel(r.sinh().powi(2), unruh_occupation(om)) < 1e-12);
        }
    }

    #[test]
    fn squeezing_small_frequency_accuracy() {
        // r diverges like -½ ln(πΩ/2); check the sinh² identity where 1 - e^{-πΩ} is tiny
        let om = RindlerFrequency::new(1e-9).unwrap();
        let r = rindler_squeezing(om);
        assert!(rel(r.sinh().powi(2), unruh_occupation(om)) < 1e-9);
    }
}
