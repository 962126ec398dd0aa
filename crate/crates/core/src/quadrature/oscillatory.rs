//! Integrals of the form `∫ g(x) e^{i(κ ln x + ν x)} dx` with smooth `g`.
//!
//! All Rindler-spectrum integrands have this shape: the Bogoliubov factor
//! contributes `κ ln x`, the packet translation contributes `ν x`. The phase
//! rate `κ/x + ν` is monotone on `x > 0`, so there is at most one stationary
//! point `x* = -κ/ν`.
//!
//! Strategy: a core of a few periods around `x*` and every flank whose total
//! phase is small go through Gauss–Kronrod on panels of fixed phase width;
//! the remaining flanks go through adaptive Levin collocation, whose cost
//! does not grow with the frequency.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::levin::{grid, levin_panel, HIGH_ORDER, LOW_ORDER};
use super::{integrate_vector, ComponentTolerance, QuadratureConfig, QuadratureError, QuadratureResult};

/// Phase `κ ln x + ν x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogChirp {
    pub kappa: f64,
    pub nu: f64,
}

impl LogChirp {
    pub fn new(kappa: f64, nu: f64) -> Self {
        Self { kappa, nu }
    }

    pub fn rate(&self, x: f64) -> f64 {
        self.kappa / x + self.nu
    }

    /// The point where the phase rate vanishes, if it lies on `x > 0`.
    pub fn stationary_point(&self) -> Option<f64> {
        if self.nu != 0.0 && self.kappa != 0.0 && self.kappa.signum() != self.nu.signum() {
            Some(-self.kappa / self.nu)
        } else {
            None
        }
    }
}

/// Half-width, in radians of phase, of the Gauss–Kronrod core around a stationary point.
const CORE_PHASE: f64 = 8.0 * PI;
/// Flanks with less total phase than this are not worth a Levin solve.
const LEVIN_MIN_PHASE: f64 = 32.0 * PI;
/// Levin children swinging less than this go to Kronrod.
const LEVIN_MIN_SWING: f64 = 2.0 * PI;
const LEVIN_MAX_DEPTH: u32 = 14;

/// `∫_lo^hi g(x) e^{iκ ln x} dx`.
pub fn integrate_log_oscillatory<G>(
    g: G,
    kappa: f64,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadratureError>
where
    G: Fn(f64) -> Complex64 + Sync,
{
    integrate_log_chirp(g, LogChirp::new(kappa, 0.0), lo, hi, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PieceKind {
    Kronrod,
    Levin,
}

#[derive(Debug, Clone)]
struct Piece {
    lo: f64,
    hi: f64,
    kind: PieceKind,
}

#[derive(Debug, Clone)]
struct LevinPanel {
    lo: f64,
    hi: f64,
    depth: u32,
    value: Complex64,
    error: f64,
}

/// `∫_lo^hi g(x) e^{i(κ ln x + ν x)} dx`.
pub fn integrate_log_chirp<G>(
    g: G,
    chirp: LogChirp,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadratureError>
where
    G: Fn(f64) -> Complex64 + Sync,
{
    cfg.validate()?;
    if !(lo > 0.0) {
        return Err(QuadratureError::NonPositiveLogDomain { lo });
    }
    if !(lo < hi) || !hi.is_finite() {
        return Err(QuadratureError::InvalidInterval { lo, hi });
    }

    // phase measured from lo; the constant e^{iθ(lo)} is applied at the end
    let phase = |x: f64| chirp.kappa * ((x - lo) / lo).ln_1p() + chirp.nu * (x - lo);
    let rate = |x: f64| chirp.rate(x);
    let integrand = |x: f64| g(x) * Complex64::cis(phase(x));

    let pieces = partition(chirp, lo, hi, &phase);
    let width = hi - lo;
    let reference = Complex64::cis(chirp.kappa * lo.ln() + chirp.nu * lo);
    let mut evaluations = 0usize;

    // Each piece is first held to its own relative tolerance. When the pieces
    // cancel, one retry holds them to the tolerance of the sum instead.
    let mut piece_abs = cfg.abs_tol;
    let mut piece_rel = cfg.rel_tol;
    let mut attempt = 0;
    loop {
        let mut total = Complex64::new(0.0, 0.0);
        let mut error = 0.0;
        let mut failures: Vec<String> = Vec::new();
        let mut limited = false;
        for piece in &pieces {
            let share = (piece.hi - piece.lo) / width;
            let piece_cfg = QuadratureConfig { abs_tol: piece_abs * share, rel_tol: piece_rel, ..*cfg };
            let outcome = match piece.kind {
                PieceKind::Kronrod => {
                    kronrod_piece(&integrand, chirp, piece.lo, piece.hi, &piece_cfg, evaluations)?
                }
                PieceKind::Levin => {
                    levin_piece(&g, &integrand, &rate, &phase, chirp, piece.lo, piece.hi, &piece_cfg, evaluations)?
                }
            };
            total += outcome.value;
            error += outcome.error_estimate;
            limited |= outcome.roundoff_limited;
            evaluations += outcome.evaluations;
            if !outcome.converged {
                failures.push(format!(
                    "[{:.6e}, {:.6e}]: {}",
                    piece.lo,
                    piece.hi,
                    outcome.diagnostic.unwrap_or_else(|| "not converged".into())
                ));
            }
        }
        let value = total * reference;
        let tol = cfg.tolerance_for(value.norm());
        let within = error <= tol;
        if !within && failures.is_empty() && attempt == 0 && pieces.len() > 1 {
            attempt += 1;
            piece_abs = 0.5 * tol;
            piece_rel = f64::MIN_POSITIVE;
            continue;
        }
        // after the retry every piece either met its share or hit round-off
        let roundoff_limited = !within && limited && attempt > 0;
        let converged = failures.is_empty() && (within || roundoff_limited);
        let diagnostic = if within && failures.is_empty() {
            None
        } else if failures.is_empty() {
            Some(format!("summed piece errors {error:.3e} exceed tolerance {tol:.3e}"))
        } else {
            Some(failures.join("; "))
        };
        return Ok(QuadratureResult { value, error_estimate: error, evaluations, converged, roundoff_limited, diagnostic });
    }
}

fn partition(chirp: LogChirp, lo: f64, hi: f64, phase: &dyn Fn(f64) -> f64) -> Vec<Piece> {
    let mut cuts = vec![lo];
    let mut core = None;
    // a stationary point outside [lo, hi] gets no core: cutting there would
    // split a small integral into two large cancelling pieces
    if let Some(xs) = chirp.stationary_point().filter(|&xs| lo < xs && xs < hi) {
        let half = xs * (2.0 * CORE_PHASE / chirp.kappa.abs()).sqrt();
        let (c_lo, c_hi) = ((xs - half).max(lo), (xs + half).min(hi));
        if c_lo < c_hi {
            if c_lo > lo {
                cuts.push(c_lo);
            }
            if c_hi < hi {
                cuts.push(c_hi);
            }
            core = Some((c_lo, c_hi));
        }
    }
    cuts.push(hi);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let is_core = core.map_or(false, |(a, b)| w[0] >= a && w[1] <= b);
            let swing = (phase(w[1]) - phase(w[0])).abs();
            let kind = if is_core || swing < LEVIN_MIN_PHASE { PieceKind::Kronrod } else { PieceKind::Levin };
            Piece { lo: w[0], hi: w[1], kind }
        })
        .collect()
}

/// Breakpoints on `[a, b]` such that each panel spans at most `step` radians.
fn phase_breaks(chirp: LogChirp, a: f64, b: f64, step: f64, max_panels: usize) -> Option<Vec<f64>> {
    let cap = (b - a) / 4.0;
    let mut breaks = vec![a];
    let mut x = a;
    while x < b {
        let mut h = (step / chirp.rate(x).abs().max(f64::MIN_POSITIVE)).min(cap);
        // the rate is monotone, so its maximum on [x, x+h] sits at an end point
        for _ in 0..4 {
            let end = (x + h).min(b);
            let r = chirp.rate(end).abs().max(chirp.rate(x).abs());
            if r * (end - x) <= step * 1.000_001 {
                break;
            }
            h = step / r;
        }
        x = if x + h >= b || b - (x + h) < 1e-12 * (b - a) { b } else { x + h };
        breaks.push(x);
        if breaks.len() > max_panels + 1 {
            return None;
        }
    }
    Some(breaks)
}

fn kronrod_piece(
    integrand: &(dyn Fn(f64) -> Complex64 + Sync),
    chirp: LogChirp,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
    spent: usize,
) -> Result<QuadratureResult, QuadratureError> {
    let step = 2.0 * PI / cfg.oscillation_panels_per_period as f64;
    let remaining = cfg.max_evaluations.saturating_sub(spent);
    let Some(breaks) = phase_breaks(chirp, a, b, step, remaining / 21) else {
        return Ok(QuadratureResult::unconverged(
            Complex64::new(0.0, 0.0),
            f64::INFINITY,
            0,
            format!("phase panelling of [{a:.6e}, {b:.6e}] exceeds the evaluation budget"),
        ));
    };
    let local = QuadratureConfig { max_evaluations: remaining.max(21), ..*cfg };
    let res = integrate_vector(integrand, &breaks, &ComponentTolerance::uniform(&local), &local)?;
    Ok(QuadratureResult {
        value: res.value,
        error_estimate: res.errors[0],
        evaluations: res.evaluations,
        converged: res.converged,
        roundoff_limited: res.roundoff_limited,
        diagnostic: res.diagnostic,
    })
}

#[allow(clippy::too_many_arguments)]
fn levin_piece<G>(
    g: &G,
    integrand: &(dyn Fn(f64) -> Complex64 + Sync),
    rate: &dyn Fn(f64) -> f64,
    phase: &dyn Fn(f64) -> f64,
    chirp: LogChirp,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
    spent: usize,
) -> Result<QuadratureResult, QuadratureError>
where
    G: Fn(f64) -> Complex64 + Sync,
{
    let mut evaluations = 0usize;
    let checked = |x: f64| -> Result<Complex64, QuadratureError> {
        let v = g(x);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFiniteIntegrand { abscissa: x })
        }
    };
    let solve = |lo: f64, hi: f64, depth: u32, evaluations: &mut usize| -> Result<LevinPanel, QuadratureError> {
        // sample once through the checked path so NaNs surface with their abscissa
        let low_grid = grid(LOW_ORDER);
        let high_grid = grid(HIGH_ORDER);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for t in low_grid.nodes.iter().chain(high_grid.nodes.iter()) {
            checked(mid + half * t)?;
        }
        *evaluations += LOW_ORDER + HIGH_ORDER;
        let env = |x: f64| g(x);
        let low = levin_panel(&env, rate, phase, lo, hi, low_grid);
        let high = levin_panel(&env, rate, phase, lo, hi, high_grid);
        Ok(match (low, high) {
            (Some(l), Some(h)) => LevinPanel { lo, hi, depth, value: h, error: (h - l).norm() },
            _ => LevinPanel { lo, hi, depth, value: Complex64::new(0.0, 0.0), error: f64::INFINITY },
        })
    };

    let mut panels = vec![solve(a, b, 0, &mut evaluations)?];
    // panels handed to Kronrod are settled immediately so their error counts
    // against the same tolerance as the Levin panels
    let mut settled = Complex64::new(0.0, 0.0);
    let mut settled_error = 0.0;
    let mut converged = true;
    let mut limited = false;
    let mut diagnostic = None;
    let budget = cfg.max_evaluations.saturating_sub(spent);

    loop {
        let value: Complex64 = settled + panels.iter().map(|p| p.value).sum::<Complex64>();
        let error: f64 = settled_error + panels.iter().map(|p| p.error).sum::<f64>();
        let tol = cfg.tolerance_for(value.norm());
        if error <= tol || panels.is_empty() || !converged {
            break;
        }
        let mut order: Vec<usize> = (0..panels.len()).collect();
        order.sort_by(|&i, &j| panels[j].error.total_cmp(&panels[i].error).then(i.cmp(&j)));
        let mut remaining = error;
        let mut split = Vec::new();
        for i in order {
            if remaining <= 0.5 * tol {
                break;
            }
            remaining -= panels[i].error;
            split.push(i);
        }
        if evaluations + split.len() * 2 * (LOW_ORDER + HIGH_ORDER) > budget {
            break;
        }
        split.sort_unstable();
        let mut next = Vec::with_capacity(panels.len() + split.len());
        let mut pick = split.iter().peekable();
        for (i, p) in panels.into_iter().enumerate() {
            if pick.peek() == Some(&&i) {
                pick.next();
                let mid = 0.5 * (p.lo + p.hi);
                let too_deep = p.depth >= LEVIN_MAX_DEPTH;
                for (l, h) in [(p.lo, mid), (mid, p.hi)] {
                    let swing = (phase(h) - phase(l)).abs();
                    if too_deep || swing < LEVIN_MIN_SWING {
                        let share = (h - l) / (b - a);
                        let sub = QuadratureConfig { abs_tol: cfg.abs_tol * share, ..*cfg };
                        let r = kronrod_piece(integrand, chirp, l, h, &sub, spent + evaluations)?;
                        settled += r.value;
                        settled_error += r.error_estimate;
                        evaluations += r.evaluations;
                        limited |= r.roundoff_limited;
                        if !r.converged {
                            converged = false;
                            diagnostic = r.diagnostic;
                        }
                    } else {
                        next.push(solve(l, h, p.depth + 1, &mut evaluations)?);
                    }
                }
            } else {
                next.push(p);
            }
        }
        panels = next;
    }

    let value: Complex64 = settled + panels.iter().map(|p| p.value).sum::<Complex64>();
    let levin_error: f64 = panels.iter().map(|p| p.error).sum();
    let error = settled_error + levin_error;
    converged &= error.is_finite();
    let tol = cfg.tolerance_for(value.norm());
    // round-off in the Kronrod remainder excuses only its own share
    let limited = limited && levin_error <= tol;
    if converged && error > tol && !limited {
        converged = false;
        diagnostic = Some(format!("Levin panels stalled at error {error:.3e} (tolerance {tol:.3e})"));
    }
    let roundoff_limited = converged && error > tol;
    Ok(QuadratureResult { value, error_estimate: error, evaluations, converged, roundoff_limited, diagnostic })
}
