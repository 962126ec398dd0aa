//! Single-mode Gaussian states seen by the accelerated detector.
//!
//! Covariance matrices use the convention `σ_ij = ⟨X_i X_j + X_j X_i⟩` with
//! `x = (d + d†)/√2`, `p = (d - d†)/(√2 i)`, so the vacuum is the identity.
//! Both scenarios share
//!
//! ```text
//! (1 + 2⟨n⟩_U)·I + 2 sinh²s · local(α, α', β, β')
//! ```
//!
//! and the entangled one adds `2 sinh 2s · cross(α, α', β, β')`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::overlap::OverlapSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("squeezing parameter must lie in [0, {max}], got {0}", max = SqueezingParam::MAX)]
    InvalidSqueezing(f64),
    #[error("overlap set is not converged; refusing to assemble covariance matrices")]
    UnconvergedOverlaps,
    #[error("unphysical covariance matrix: det = {det} < 1")]
    Unphysical { det: f64 },
    #[error("fidelity {0} outside [0, 1]")]
    FidelityOutOfRange(f64),
}

/// Determinants below `1 - UNPHYSICAL_SLACK` are rejected by [`fidelity`].
pub const UNPHYSICAL_SLACK: f64 = 1e-6;
/// Fidelities this far outside `[0, 1]` are clamped instead of rejected.
pub const FIDELITY_CLAMP: f64 = 1e-9;

/// Sign of the `sinh 2s` block relative to [`cross_block_reference`].
///
/// The truncated-Fock oracle in [`crate::fock`] measures this sign for a
/// two-mode squeezed state `exp[s(a†b† - ab)]|0⟩` and reports it; the
/// covariance assembly uses the measured value.
pub const CROSS_BLOCK_SIGN: f64 = -1.0;

/// Symmetric 2×2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl CovarianceMatrix {
    pub fn new(s11: f64, s12: f64, s22: f64) -> Self {
        Self { s11, s12, s22 }
    }

    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    pub fn scaled_identity(x: f64) -> Self {
        Self { s11: x, s12: 0.0, s22: x }
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn trace(&self) -> f64 {
        self.s11 + self.s22
    }

    pub fn scale(&self, x: f64) -> Self {
        Self { s11: self.s11 * x, s12: self.s12 * x, s22: self.s22 * x }
    }

    /// `tr(adj(self) · other)`, the mixed term of `det(self + other)`.
    pub fn mixed_det(&self, other: &Self) -> f64 {
        self.s22 * other.s11 + self.s11 * other.s22 - 2.0 * self.s12 * other.s12
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.s11 - other.s11).abs().max((self.s12 - other.s12).abs()).max((self.s22 - other.s22).abs())
    }
}

impl std::ops::Add for CovarianceMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { s11: self.s11 + o.s11, s12: self.s12 + o.s12, s22: self.s22 + o.s22 }
    }
}

impl std::ops::Sub for CovarianceMatrix {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { s11: self.s11 - o.s11, s12: self.s12 - o.s12, s22: self.s22 - o.s22 }
    }
}

/// Two-mode squeezing strength `s`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SqueezingParam(f64);

impl SqueezingParam {
    /// `cosh 2s` stays far from overflow below this.
    pub const MAX: f64 = 10.0;

    pub fn new(s: f64) -> Result<Self, GaussianError> {
        if (0.0..=Self::MAX).contains(&s) {
            Ok(Self(s))
        } else {
            Err(GaussianError::InvalidSqueezing(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SqueezingParam {
    type Error = GaussianError;
    fn try_from(s: f64) -> Result<Self, GaussianError> {
        Self::new(s)
    }
}

impl From<SqueezingParam> for f64 {
    fn from(s: SqueezingParam) -> f64 {
        s.0
    }
}

/// Coefficients of `d = αa + α'a† + βb + β'b† + d⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub alpha: Complex64,
    pub alpha_prime: Complex64,
    pub beta: Complex64,
    pub beta_prime: Complex64,
}

impl ModeCoefficients {
    pub fn new(alpha: Complex64, alpha_prime: Complex64, beta: Complex64, beta_prime: Complex64) -> Self {
        Self { alpha, alpha_prime, beta, beta_prime }
    }

    pub fn from_overlaps(ov: &OverlapSet) -> Self {
        Self::new(ov.alpha, ov.alpha_prime, ov.beta, ov.beta_prime)
    }

    /// `(α + α'*, β + β'*, α - α'*, β - β'*)`.
    fn quadrature_weights(&self) -> [Complex64; 4] {
        [
            self.alpha + self.alpha_prime.conj(),
            self.beta + self.beta_prime.conj(),
            self.alpha - self.alpha_prime.conj(),
            self.beta - self.beta_prime.conj(),
        ]
    }
}

/// The block multiplying `2 sinh²s`; it is also the vacuum `a, b` sector.
pub fn local_block(c: &ModeCoefficients) -> CovarianceMatrix {
    let [a_plus, b_plus, a_minus, b_minus] = c.quadrature_weights();
    CovarianceMatrix {
        s11: b_plus.norm_sqr() + a_plus.norm_sqr(),
        s12: 2.0 * (c.beta * c.beta_prime + c.alpha * c.alpha_prime).im,
        s22: b_minus.norm_sqr() + a_minus.norm_sqr(),
    }
}

/// Reference orientation of the block multiplying `2 sinh 2s`:
/// `[[-Re(B₊A₊), -Im(βα + β'α')], [·, Re(B₋A₋)]]`.
pub fn cross_block_reference(c: &ModeCoefficients) -> CovarianceMatrix {
    let [a_plus, b_plus, a_minus, b_minus] = c.quadrature_weights();
    CovarianceMatrix {
        s11: -(b_plus * a_plus).re,
        s12: -(c.beta * c.alpha + c.beta_prime * c.alpha_prime).im,
        s22: (b_minus * a_minus).re,
    }
}

fn check_inputs(ov: &OverlapSet) -> Result<(), GaussianError> {
    if ov.converged() {
        Ok(())
    } else {
        Err(GaussianError::UnconvergedOverlaps)
    }
}

/// `(1 + 2⟨n⟩_U)·I + 2 sinh²s · local`.
pub fn covariance_separable(ov: &OverlapSet, s: SqueezingParam) -> Result<CovarianceMatrix, GaussianError> {
    check_inputs(ov)?;
    Ok(separable_from(&ModeCoefficients::from_overlaps(ov), ov.n_unruh, s))
}

/// Separable covariance plus the signed `2 sinh 2s` cross block.
pub fn covariance_entangled(ov: &OverlapSet, s: SqueezingParam) -> Result<CovarianceMatrix, GaussianError> {
    covariance_entangled_with_sign(ov, s, CROSS_BLOCK_SIGN)
}

/// [`covariance_entangled`] with an explicit cross-block sign, for fault injection.
pub fn covariance_entangled_with_sign(
    ov: &OverlapSet,
    s: SqueezingParam,
    sign: f64,
) -> Result<CovarianceMatrix, GaussianError> {
    check_inputs(ov)?;
    let c = ModeCoefficients::from_overlaps(ov);
    Ok(separable_from(&c, ov.n_unruh, s) + cross_term(&c, s, sign))
}

fn separable_from(c: &ModeCoefficients, n_unruh: f64, s: SqueezingParam) -> CovarianceMatrix {
    let sh = s.value().sinh();
    CovarianceMatrix::scaled_identity(1.0 + 2.0 * n_unruh) + local_block(c).scale(2.0 * sh * sh)
}

/// `sign · 2 sinh 2s · cross_block_reference`.
pub fn cross_term(c: &ModeCoefficients, s: SqueezingParam, sign: f64) -> CovarianceMatrix {
    cross_block_reference(c).scale(sign * 2.0 * (2.0 * s.value()).sinh())
}

/// Fidelity and the two error-probability bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationResult {
    pub fidelity: f64,
    /// `1 - F`, computed without cancellation.
    pub infidelity: f64,
    pub f_minus: f64,
    pub f_plus: f64,
    /// `Δ = det(σ + σ_s)`.
    pub det_sum: f64,
    /// `δ = (det σ - 1)(det σ_s - 1)`, clamped at 0.
    pub det_prod_term: f64,
}

/// `F = 2 / (√(Δ + δ) - √δ)` between two zero-mean single-mode states.
pub fn fidelity(sig: &CovarianceMatrix, sig_s: &CovarianceMatrix) -> Result<DiscriminationResult, GaussianError> {
    fidelity_from_blocks(sig_s, &(*sig - *sig_s))
}

/// Fidelity between `base + diff` and `base`.
///
/// Passing the difference directly keeps `1 - F` accurate when the two
/// states nearly coincide.
pub fn fidelity_from_blocks(
    base: &CovarianceMatrix,
    diff: &CovarianceMatrix,
) -> Result<DiscriminationResult, GaussianError> {
    let sig = *base + *diff;
    for det in [sig.det(), base.det()] {
        if !(det >= 1.0 - UNPHYSICAL_SLACK) {
            return Err(GaussianError::Unphysical { det });
        }
    }
    let d = base.det();
    let t = base.mixed_det(diff);
    let c = diff.det();
    let u = d - 1.0;
    // det(σ) - 1 = u + t + c
    let excess = u + t + c;
    let det_sum = 4.0 * (u + 1.0) + 2.0 * t + c;
    let det_prod_term = (u * excess).max(0.0);
    let root_sum = (det_sum + det_prod_term).sqrt();
    let root_prod = det_prod_term.sqrt();
    let denom = root_sum - root_prod;

    // Δ - 4 - 4√δ without cancellation, via r = √(1 + (t + c)/u)
    let numerator = if u > 1e-3 {
        let r = (1.0 + (t + c) / u).max(0.0).sqrt();
        (2.0 * t * (t + c) / (u * (1.0 + r)) + c * (r - 3.0)) / (1.0 + r)
    } else {
        det_sum - 4.0 - 4.0 * root_prod
    };
    let infidelity = (numerator / ((root_sum + 2.0 + root_prod) * denom)).max(0.0);
    let fidelity = (2.0 / denom).min(1.0);
    let (f_minus, f_plus) = bounds_from(fidelity, infidelity.min(1.0));
    Ok(DiscriminationResult { fidelity, infidelity, f_minus, f_plus, det_sum, det_prod_term })
}

fn bounds_from(fidelity: f64, infidelity: f64) -> (f64, f64) {
    (0.5 * (1.0 - infidelity.sqrt()), 0.5 * fidelity.sqrt())
}

/// `F₋ = (1 - √(1 - F))/2`, `F₊ = √F / 2`.
pub fn error_bounds(f: f64) -> Result<(f64, f64), GaussianError> {
    if !(f >= -FIDELITY_CLAMP && f <= 1.0 + FIDELITY_CLAMP) {
        return Err(GaussianError::FidelityOutOfRange(f));
    }
    let f = f.clamp(0.0, 1.0);
    Ok(bounds_from(f, 1.0 - f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sq(s: f64) -> SqueezingParam {
        SqueezingParam::new(s).unwrap()
    }

    fn set(alpha: Complex64, alpha_prime: Complex64, beta: Complex64, beta_prime: Complex64, n: f64) -> OverlapSet {
        OverlapSet::from_coefficients(alpha, alpha_prime, beta, beta_prime, n)
    }

    #[test]
    fn zero_squeezing_gives_noisy_vacuum() {
        let ov = set(c(0.3, 0.1), c(0.02, -0.01), c(0.7, 0.0), c(0.05, 0.03), 0.2);
        let e = covariance_entangled(&ov, sq(0.0)).unwrap();
        assert!(e.max_abs_diff(&CovarianceMatrix::scaled_identity(1.4)) < 1e-15);
    }

    #[test]
    fn perfect_match_is_thermal() {
        let zero = c(0.0, 0.0);
        let ov = set(zero, zero, c(1.0, 0.0), zero, 0.0);
        for s in [0.3, 1.0, 3.0] {
            let e = covariance_entangled(&ov, sq(s)).unwrap();
            assert!(e.max_abs_diff(&CovarianceMatrix::scaled_identity((2.0 * s).cosh())) < 1e-12 * (2.0 * s).cosh());
        }
    }

    #[test]
    fn separable_is_entangled_minus_cross_block() {
        let ov = set(c(0.2, -0.1), c(0.01, 0.04), c(0.6, 0.0), c(-0.03, 0.02), 0.1);
        let coeffs = ModeCoefficients::from_overlaps(&ov);
        let s = sq(1.3);
        let diff = covariance_entangled(&ov, s).unwrap() - covariance_separable(&ov, s).unwrap();
        assert!(diff.max_abs_diff(&cross_term(&coeffs, s, CROSS_BLOCK_SIGN)) < 1e-14);
    }

    #[test]
    fn no_alice_overlap_means_identical_states() {
        let zero = c(0.0, 0.0);
        let ov = set(zero, zero, c(0.8, 0.0), c(0.05, -0.02), 0.3);
        let s = sq(2.0);
        let e = covariance_entangled(&ov, s).unwrap();
        let p = covariance_separable(&ov, s).unwrap();
        assert_eq!(e, p);
        let r = fidelity(&e, &p).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        assert_eq!(r.infidelity, 0.0);
    }

    #[test]
    fn unconverged_overlaps_refused() {
        let mut ov = set(c(0.1, 0.0), c(0.0, 0.0), c(0.9, 0.0), c(0.0, 0.0), 0.0);
        ov.convergence.outer = false;
        assert_eq!(covariance_entangled(&ov, sq(1.0)), Err(GaussianError::UnconvergedOverlaps));
        assert_eq!(covariance_separable(&ov, sq(1.0)), Err(GaussianError::UnconvergedOverlaps));
    }

    #[test]
    fn squeezing_validation() {
        assert!(SqueezingParam::new(-0.1).is_err());
        assert!(SqueezingParam::new(10.5).is_err());
        assert!(SqueezingParam::new(f64::NAN).is_err());
        assert_eq!(SqueezingParam::new(3.0).unwrap().value(), 3.0);
    }

    #[test]
    fn fidelity_of_identical_states_is_one() {
        for m in [CovarianceMatrix::identity(), CovarianceMatrix::new(3.0, 0.5, 2.0), CovarianceMatrix::scaled_identity(50.0)] {
            let r = fidelity(&m, &m).unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-14, "{r:?}");
            assert_eq!(r.infidelity, 0.0);
            assert_eq!((r.f_minus, r.f_plus), (0.5, 0.5));
        }
    }

    #[test]
    fn vacuum_versus_thermal() {
        // F = 1/(1 + n) for vacuum against a thermal state with occupation n
        for n in [1.0, 0.25, 7.0] {
            let r = fidelity(&CovarianceMatrix::identity(), &CovarianceMatrix::scaled_identity(2.0 * n + 1.0)).unwrap();
            assert!((r.fidelity - 1.0 / (1.0 + n)).abs() < 1e-14);
            assert!((r.infidelity - n / (1.0 + n)).abs() < 1e-14);
        }
    }

    #[test]
    fn slightly_negative_product_term_clamped() {
        // det σ_s = 1 - 1e-12 makes δ ≈ -1e-12·(det σ - 1)
        let a = CovarianceMatrix::new(1.0, 0.0, 1.0 - 1e-12);
        let b = CovarianceMatrix::scaled_identity(2.0);
        let r = fidelity(&b, &a).unwrap();
        assert_eq!(r.det_prod_term, 0.0);
        assert!(r.fidelity > 0.0 && r.fidelity <= 1.0);
    }

    #[test]
    fn unphysical_rejected() {
        let bad = CovarianceMatrix::scaled_identity(0.5);
        assert!(matches!(fidelity(&bad, &CovarianceMatrix::identity()), Err(GaussianError::Unphysical { .. })));
    }

    #[test]
    fn error_bound_values() {
        assert_eq!(error_bounds(1.0).unwrap(), (0.5, 0.5));
        assert_eq!(error_bounds(0.0).unwrap(), (0.0, 0.0));
        let (lo, hi) = error_bounds(0.25).unwrap();
        assert!((lo - (1.0 - 0.75f64.sqrt()) / 2.0).abs() < 1e-16);
        assert!((hi - 0.25).abs() < 1e-16);
        assert_eq!(error_bounds(1.0 + 1e-10).unwrap(), (0.5, 0.5));
        assert!(error_bounds(1.1).is_err());
        assert!(error_bounds(-0.01).is_err());
    }

    #[test]
    fn stable_infidelity_matches_direct_form_when_not_tiny() {
        let base = CovarianceMatrix::new(3.0, 0.4, 2.5);
        let diff = CovarianceMatrix::new(0.3, -0.2, 0.1);
        let r = fidelity_from_blocks(&base, &diff).unwrap();
        assert!((r.infidelity - (1.0 - r.fidelity)).abs() < 1e-14);
    }

    #[test]
    fn stable_infidelity_resolves_tiny_differences() {
        // infidelity is quadratic in a small cross block
        let base = CovarianceMatrix::new(3.0, 0.4, 2.5);
        let unit = CovarianceMatrix::new(1.0, 0.3, -0.7);
        let r1 = fidelity_from_blocks(&base, &unit.scale(1e-6)).unwrap();
        let r2 = fidelity_from_blocks(&base, &unit.scale(2e-6)).unwrap();
        assert!(r1.infidelity > 0.0);
        assert!((r2.infidelity / r1.infidelity - 4.0).abs() < 1e-5, "{} {}", r1.infidelity, r2.infidelity);
    }

    fn coeff() -> impl Strategy<Value = Complex64> {
        (-0.6..0.6f64, -0.6..0.6f64).prop_map(|(re, im)| Complex64::new(re, im))
    }

    proptest! {
        #[test]
        fn difference_is_exactly_cross_block(a in coeff(), ap in coeff(), b in coeff(), bp in coeff(), s in 0.0..5.0f64, n in 0.0..2.0f64) {
            let ov = set(a, ap, b, bp, n);
            let s = sq(s);
            let diff = covariance_entangled(&ov, s).unwrap() - covariance_separable(&ov, s).unwrap();
            let cross = cross_term(&ModeCoefficients::from_overlaps(&ov), s, CROSS_BLOCK_SIGN);
            let scale = 1.0 + cross.s11.abs().max(cross.s22.abs()) + (2.0 * s.value()).cosh();
            prop_assert!(diff.max_abs_diff(&cross) <= 1e-14 * scale);
        }

        #[test]
        fn fidelity_is_symmetric(x in 1.0..5.0f64, y in 1.0..5.0f64, r in -0.9..0.9f64, x2 in 1.0..5.0f64, y2 in 1.0..5.0f64, r2 in -0.9..0.9f64) {
            // s12 = r·√(s11 s22 - 1) keeps both determinants ≥ 1
            let m1 = CovarianceMatrix::new(x, r * (x * y - 1.0).max(0.0).sqrt(), y);
            let m2 = CovarianceMatrix::new(x2, r2 * (x2 * y2 - 1.0).max(0.0).sqrt(), y2);
            let f12 = fidelity(&m1, &m2).unwrap();
            let f21 = fidelity(&m2, &m1).unwrap();
            prop_assert!((f12.fidelity - f21.fidelity).abs() < 1e-12);
            prop_assert!(f12.fidelity > 0.0 && f12.fidelity <= 1.0);
            prop_assert!((f12.infidelity - (1.0 - f12.fidelity)).abs() < 1e-12);
        }

        #[test]
        fn bounds_ordered(f in 0.0..=1.0f64) {
            let (lo, hi) = error_bounds(f).unwrap();
            prop_assert!(0.0 <= lo && lo <= hi && hi <= 0.5);
        }
    }
}
