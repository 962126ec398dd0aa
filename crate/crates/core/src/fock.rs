//! Brute-force check of the covariance blocks in a truncated two-mode Fock space.
//!
//! States live on `|n_a, n_b⟩` with `n ≤ cutoff`. Ladder operators act on
//! vectors padded by two levels, so `D̂²` is exact on every truncated state and
//! the only approximation is the discarded tail of the state itself.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::gaussian::ModeCoefficients;
use crate::gaussian::{cross_block_reference, local_block, CovarianceMatrix};

/// Largest discarded probability accepted when building or measuring a state.
pub const TRUNCATION_TOL: f64 = 1e-8;
/// Entrywise agreement demanded by [`verify_covariance_blocks`].
pub const BLOCK_TOL: f64 = 1e-6;
/// Squeezing above this needs cutoffs beyond what the oracle is meant for.
pub const MAX_ORACLE_SQUEEZING: f64 = 1.5;
const PAD: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("cutoff must be at least 1, got {0}")]
    CutoffTooSmall(usize),
    #[error("squeezing must be finite and non-negative, got {0}")]
    InvalidSqueezing(f64),
    #[error("cutoff {cutoff} leaks {leakage:e} at s = {s}; need cutoff ≥ {required}")]
    Truncation { s: f64, cutoff: usize, leakage: f64, required: usize },
    #[error("oracle limited to s ≤ {max}, got {0}", max = MAX_ORACLE_SQUEEZING)]
    SqueezingTooLarge(f64),
    #[error("coefficients must be finite")]
    NonFiniteCoefficients,
    #[error("covariance block mismatch:\n{0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// `exp[s(a†b† - ab)]|0,0⟩`.
    Tmss,
    /// Product of two thermal states with occupation `sinh²s` each.
    ThermalProduct,
}

#[derive(Debug, Clone)]
enum Populations {
    /// Amplitudes of `|n, n⟩`.
    Diagonal(Vec<f64>),
    /// Single-mode weights; the state is their product.
    Product(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct TruncatedState {
    pub kind: StateKind,
    pub s: f64,
    pub cutoff: usize,
    /// Probability discarded by the truncation, before renormalising.
    pub leakage: f64,
    pops: Populations,
}

/// Probability outside `n ≤ cutoff`.
pub fn truncation_leakage(kind: StateKind, s: f64, cutoff: usize) -> f64 {
    let tail = s.tanh().powi(2 * (cutoff as i32 + 1));
    match kind {
        StateKind::Tmss => tail,
        StateKind::ThermalProduct => tail * (2.0 - tail),
    }
}

/// Smallest cutoff whose leakage is at most `tol`.
pub fn required_cutoff(kind: StateKind, s: f64, tol: f64) -> usize {
    (1..100_000).find(|&c| truncation_leakage(kind, s, c) <= tol).unwrap_or(100_000)
}

pub fn build_state(kind: StateKind, s: f64, cutoff: usize) -> Result<TruncatedState, FockError> {
    build_state_with_tol(kind, s, cutoff, TRUNCATION_TOL)
}

pub fn build_state_with_tol(kind: StateKind, s: f64, cutoff: usize, tol: f64) -> Result<TruncatedState, FockError> {
    if cutoff < 1 {
        return Err(FockError::CutoffTooSmall(cutoff));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(FockError::InvalidSqueezing(s));
    }
    let leakage = truncation_leakage(kind, s, cutoff);
    if leakage > tol {
        return Err(FockError::Truncation { s, cutoff, leakage, required: required_cutoff(kind, s, tol) });
    }
    let t = s.tanh();
    let pops = match kind {
        StateKind::Tmss => {
            let amps = geometric(1.0 / s.cosh(), t, cutoff);
            let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
            Populations::Diagonal(amps.into_iter().map(|a| a / norm).collect())
        }
        StateKind::ThermalProduct => {
            let c = s.cosh();
            let w = geometric(1.0 / (c * c), t * t, cutoff);
            let total: f64 = w.iter().sum();
            Populations::Product(w.into_iter().map(|x| x / total).collect())
        }
    };
    Ok(TruncatedState { kind, s, cutoff, leakage, pops })
}

fn geometric(first: f64, ratio: f64, cutoff: usize) -> Vec<f64> {
    std::iter::successors(Some(first), |x| Some(x * ratio)).take(cutoff + 1).collect()
}

/// Dense vector on the padded two-mode grid.
struct Grid {
    levels: usize,
}

impl Grid {
    fn new(cutoff: usize) -> Self {
        Self { levels: cutoff + PAD + 1 }
    }

    fn zeros(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.levels * self.levels]
    }

    fn index(&self, na: usize, nb: usize) -> usize {
        na * self.levels + nb
    }

    /// `D̂ψ` or, with `dagger`, `D̂†ψ`.
    fn apply(&self, c: &ModeCoefficients, psi: &[Complex64], dagger: bool) -> Vec<Complex64> {
        let (lower_a, raise_a, lower_b, raise_b) = if dagger {
            (c.alpha_prime.conj(), c.alpha.conj(), c.beta_prime.conj(), c.beta.conj())
        } else {
            (c.alpha, c.alpha_prime, c.beta, c.beta_prime)
        };
        let top = self.levels - 1;
        let mut out = self.zeros();
        for na in 0..self.levels {
            for nb in 0..self.levels {
                let amp = psi[self.index(na, nb)];
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                if na > 0 {
                    out[self.index(na - 1, nb)] += lower_a * (na as f64).sqrt() * amp;
                }
                if na < top {
                    out[self.index(na + 1, nb)] += raise_a * ((na + 1) as f64).sqrt() * amp;
                }
                if nb > 0 {
                    out[self.index(na, nb - 1)] += lower_b * (nb as f64).sqrt() * amp;
                }
                if nb < top {
                    out[self.index(na, nb + 1)] += raise_b * ((nb + 1) as f64).sqrt() * amp;
                }
            }
        }
        out
    }

    /// `(⟨D̂²⟩, ⟨D̂†D̂⟩ + ⟨D̂D̂†⟩)` in the pure state `psi`.
    fn pure_moments(&self, c: &ModeCoefficients, psi: &[Complex64]) -> (Complex64, f64) {
        let d = self.apply(c, psi, false);
        let dd = self.apply(c, psi, true);
        // ⟨ψ|D̂D̂|ψ⟩ = ⟨D̂†ψ|D̂ψ⟩
        let square: Complex64 = dd.iter().zip(&d).map(|(x, y)| x.conj() * y).sum();
        let sym: f64 = d.iter().chain(&dd).map(|z| z.norm_sqr()).sum();
        (square, sym)
    }
}

fn check_coefficients(c: &ModeCoefficients) -> Result<(), FockError> {
    let parts = [c.alpha, c.alpha_prime, c.beta, c.beta_prime];
    if parts.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(FockError::NonFiniteCoefficients)
    }
}

/// `M_ij = ⟨{X̂_i, X̂_j}⟩` for quadratures built from `D̂ = αâ + α'â† + βb̂ + β'b̂†`.
pub fn sector_moments(state: &TruncatedState, c: &ModeCoefficients) -> Result<CovarianceMatrix, FockError> {
    check_coefficients(c)?;
    if state.leakage > TRUNCATION_TOL {
        return Err(FockError::Truncation {
            s: state.s,
            cutoff: state.cutoff,
            leakage: state.leakage,
            required: required_cutoff(state.kind, state.s, TRUNCATION_TOL),
        });
    }
    let grid = Grid::new(state.cutoff);
    let (square, sym) = match &state.pops {
        Populations::Diagonal(amps) => {
            let mut psi = grid.zeros();
            for (n, &a) in amps.iter().enumerate() {
                psi[grid.index(n, n)] = Complex64::new(a, 0.0);
            }
            grid.pure_moments(c, &psi)
        }
        Populations::Product(w) => {
            let mut square = Complex64::new(0.0, 0.0);
            let mut sym = 0.0;
            let mut psi = grid.zeros();
            for (na, &wa) in w.iter().enumerate() {
                for (nb, &wb) in w.iter().enumerate() {
                    let i = grid.index(na, nb);
                    psi[i] = Complex64::new(1.0, 0.0);
                    let (sq, sy) = grid.pure_moments(c, &psi);
                    psi[i] = Complex64::new(0.0, 0.0);
                    square += sq * (wa * wb);
                    sym += sy * (wa * wb);
                }
            }
            (square, sym)
        }
    };
    Ok(CovarianceMatrix {
        s11: sym + 2.0 * square.re,
        s12: 2.0 * square.im,
        s22: sym - 2.0 * square.re,
    })
}

/// Outcome of [`verify_covariance_blocks`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockReport {
    pub coefficients: ModeCoefficients,
    pub s: f64,
    pub cutoff: usize,
    pub leakage: f64,
    /// Thermal-product minus vacuum, measured.
    pub separable_measured: CovarianceMatrix,
    /// `2 sinh²s · local`, predicted.
    pub separable_predicted: CovarianceMatrix,
    /// TMSS minus thermal-product, measured.
    pub cross_measured: CovarianceMatrix,
    /// `2 sinh 2s · cross_block_reference`, unsigned.
    pub cross_reference: CovarianceMatrix,
    /// `+1` or `-1` when the measured cross block matches `±` the reference,
    /// `0` when the reference block vanishes.
    pub resolved_sign: f64,
    pub separable_residual: f64,
    pub cross_residual: f64,
    pub passed: bool,
}

impl BlockReport {
    pub fn entrywise(&self) -> String {
        let row = |name: &str, m: &CovarianceMatrix, p: &CovarianceMatrix| {
            format!(
                "  {name}: measured [{:.3e}, {:.3e}, {:.3e}] predicted [{:.3e}, {:.3e}, {:.3e}]\n",
                m.s11, m.s12, m.s22, p.s11, p.s12, p.s22
            )
        };
        let signed = self.cross_reference.scale(if self.resolved_sign == 0.0 { 1.0 } else { self.resolved_sign });
        format!(
            "{}{}  sign {} residuals {:.3e} / {:.3e}",
            row("separable", &self.separable_measured, &self.separable_predicted),
            row("cross", &self.cross_measured, &signed),
            self.resolved_sign,
            self.separable_residual,
            self.cross_residual
        )
    }
}

/// Compares measured sector differences against the analytic blocks and
/// resolves the orientation of the cross block.
pub fn verify_covariance_blocks(c: &ModeCoefficients, s: f64, cutoff: usize) -> Result<BlockReport, FockError> {
    if s > MAX_ORACLE_SQUEEZING {
        return Err(FockError::SqueezingTooLarge(s));
    }
    let vacuum = build_state(StateKind::Tmss, 0.0, 1)?;
    let thermal = build_state(StateKind::ThermalProduct, s, cutoff)?;
    let tmss = build_state(StateKind::Tmss, s, cutoff)?;
    let m_vac = sector_moments(&vacuum, c)?;
    let m_th = sector_moments(&thermal, c)?;
    let m_tmss = sector_moments(&tmss, c)?;

    let sh = s.sinh();
    let separable_measured = m_th - m_vac;
    let separable_predicted = local_block(c).scale(2.0 * sh * sh);
    let cross_measured = m_tmss - m_th;
    let cross_reference = cross_block_reference(c).scale(2.0 * (2.0 * s).sinh());

    let zero = CovarianceMatrix::new(0.0, 0.0, 0.0);
    let plus = cross_measured.max_abs_diff(&cross_reference);
    let minus = cross_measured.max_abs_diff(&cross_reference.scale(-1.0));
    let scale = cross_reference.max_abs_diff(&zero);
    let (resolved_sign, cross_residual) = if scale <= BLOCK_TOL {
        (0.0, cross_measured.max_abs_diff(&zero))
    } else if minus < plus {
        (-1.0, minus)
    } else {
        (1.0, plus)
    };
    let separable_residual = separable_measured.max_abs_diff(&separable_predicted);
    let passed = separable_residual <= BLOCK_TOL && cross_residual <= BLOCK_TOL;
    let report = BlockReport {
        coefficients: *c,
        s,
        cutoff,
        leakage: tmss.leakage.max(thermal.leakage),
        separable_measured,
        separable_predicted,
        cross_measured,
        cross_reference,
        resolved_sign,
        separable_residual,
        cross_residual,
        passed,
    };
    if passed {
        Ok(report)
    } else {
        Err(FockError::Mismatch(report.entrywise()))
    }
}
