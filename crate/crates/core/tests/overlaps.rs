use std::f64::consts::PI;

use horizon::modes::{log_bogoliubov, minkowski_gaussian_overlap, Acceleration, WavePacketSpec};
use horizon::overlap::{compute_overlaps, OverlapSet, ScenarioInputs, SpectrumEngine, SpectrumKind};
use horizon::quadrature::{integrate, QuadratureConfig};
use horizon::sweep::log_grid;
use horizon::Complex64;

fn overlaps(a: f64) -> OverlapSet {
    let ov = compute_overlaps(&ScenarioInputs::with_defaults(a).unwrap()).unwrap();
    assert!(ov.converged(), "a = {a}: {:?}", ov.convergence);
    ov
}

/// Composite Simpson weights on `n` (odd) equally spaced points.
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n % 2 == 1);
    (0..n)
        .map(|j| {
            let w = if j == 0 || j == n - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

#[test]
fn scalar_invariants() {
    for a in [0.3, 1.0, 3.0] {
        let ov = overlaps(a);
        assert_eq!(ov.alpha.im, 0.0);
        assert_eq!(ov.beta.im, 0.0);
        let top = 1.0 / ov.norm_r;
        assert!(ov.alpha.re > 0.0 && ov.alpha.re < top);
        assert!(ov.beta.re > 0.0 && ov.beta.re < top);
        let sum = ov.alpha.re + ov.beta.re;
        assert!((sum - top).abs() <= 1e-6 * top, "a = {a}: α + β = {sum}, 1/N_R = {top}");
        assert!(ov.n_unruh >= 0.0);
        assert!(ov.k_truncation > ov.cutoff);
    }
}

/// Both the inner `l` and the outer `k` integrals on one dense grid, straight
/// from the plane-wave overlaps and Bogoliubov coefficients.
#[test]
fn unit_acceleration_matches_dense_double_grid() {
    let a = 1.0;
    let accel = Acceleration::new(a).unwrap();
    let inputs = ScenarioInputs::with_defaults(a).unwrap();
    let (pa, pb) = (*inputs.packet_a(), *inputs.packet_b());
    let ov = overlaps(a);

    let (l_lo, l_hi, nl) = (0.5, 18.0, 8_751);
    let hl = (l_hi - l_lo) / (nl - 1) as f64;
    let wl = simpson_weights(nl, hl);
    let ms: Vec<f64> = (0..nl).map(|j| l_lo + hl * j as f64).collect();
    let gb: Vec<Complex64> = ms.iter().map(|&m| minkowski_gaussian_overlap(m, &pb).unwrap()).collect();
    let ga: Vec<Complex64> = ms.iter().map(|&m| minkowski_gaussian_overlap(-m, &pa).unwrap()).collect();
    let norm = |g: &[Complex64]| g.iter().zip(&wl).map(|(x, w)| w * x.norm_sqr()).sum::<f64>().powf(-0.5);
    let (norm_a, norm_b) = (norm(&ga), norm(&gb));
    assert!((norm_b - ov.norm_b).abs() <= 1e-9 * norm_b);

    let (k_lo, k_hi, nk) = (0.5, 60.0, 5_953);
    let hk = (k_hi - k_lo) / (nk - 1) as f64;
    let wk = simpson_weights(nk, hk);
    let (mut b_sq, mut a_sq, mut thermal) = (0.0, 0.0, 0.0);
    let (mut b_bc, mut a_ac) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (i, w) in wk.iter().enumerate() {
        let k = k_lo + hk * i as f64;
        let damping = -PI * k / a;
        let mut spectra = [Complex64::new(0.0, 0.0); 4];
        for j in 0..nl {
            let m = ms[j];
            let zb = log_bogoliubov(k, m, accel).unwrap().unwrap();
            let za = log_bogoliubov(-k, -m, accel).unwrap().unwrap();
            spectra[0] += gb[j] * zb.exp() * wl[j];
            spectra[1] += gb[j].conj() * (zb + damping).exp() * wl[j];
            spectra[2] += ga[j] * za.exp() * wl[j];
            spectra[3] += ga[j].conj() * (za + damping).exp() * wl[j];
        }
        let [b, bc, av, ac] = [spectra[0] * norm_b, spectra[1] * norm_b, spectra[2] * norm_a, spectra[3] * norm_a];
        b_sq += w * b.norm_sqr();
        a_sq += w * av.norm_sqr();
        b_bc += b.conj() * bc * *w;
        a_ac += av.conj() * ac * *w;
        thermal += w * (av.norm_sqr() + b.norm_sqr()) / (2.0 * PI * k / a).exp_m1();
    }
    let norm_r = (a_sq + b_sq).powf(-0.5);
    let (alpha, beta) = (norm_r * a_sq, norm_r * b_sq);
    let n_unruh = norm_r * norm_r * thermal;

    let close = |name: &str, got: f64, want: f64, rel: f64| {
        assert!((got - want).abs() <= rel * want.abs(), "{name}: engine {got:e}, dense grid {want:e}");
    };
    close("norm_r", ov.norm_r, norm_r, 1e-6);
    close("alpha", ov.alpha.re, alpha, 1e-6);
    close("beta", ov.beta.re, beta, 1e-6);
    close("n_unruh", ov.n_unruh, n_unruh, 1e-6);
    let bp = b_bc * norm_r;
    let ap = a_ac * norm_r;
    assert!((ov.beta_prime - bp).norm() <= 1e-6 * bp.norm(), "beta': {} vs {bp}", ov.beta_prime);
    assert!((ov.alpha_prime - ap).norm() <= 1e-6 * ap.norm(), "alpha': {} vs {ap}", ov.alpha_prime);
}

/// Conjugating a packet's plane-wave overlaps and moving it through the
/// origin maps one family onto the other: `(w_k, φ_B*) = e^{-πk/a} conj((w_{-k}, φ_A))`.
#[test]
fn cross_mirror_identity() {
    for a in [0.2, 1.0, 5.0] {
        let engine = SpectrumEngine::new(&ScenarioInputs::with_defaults(a).unwrap()).unwrap();
        for k in [0.5, 0.9, 2.5, 7.0] {
            let damping = (-PI * k / a).exp();
            let bc = engine.spectrum(SpectrumKind::BConj, k).unwrap().value;
            let av = engine.spectrum(SpectrumKind::A, -k).unwrap().value;
            let want = av.conj() * damping;
            assert!((bc - want).norm() <= 1e-6 * want.norm(), "a = {a}, k = {k}: {bc} vs {want}");
            let ac = engine.spectrum(SpectrumKind::AConj, -k).unwrap().value;
            let b = engine.spectrum(SpectrumKind::B, k).unwrap().value;
            let want = b.conj() * damping;
            assert!((ac - want).norm() <= 1e-6 * want.norm(), "a = {a}, k = {k}: {ac} vs {want}");
        }
    }
}

/// Slowly oscillating regime: the log-chirp path against plain adaptive integration.
#[test]
fn low_frequency_spectrum_matches_plain_quadrature() {
    let a = 10.0;
    let inputs = ScenarioInputs::with_defaults(a).unwrap();
    let engine = SpectrumEngine::new(&inputs).unwrap();
    let spec = *inputs.packet_b();
    let accel = inputs.accel();
    let cfg = QuadratureConfig::with_tolerances(1e-10, 1e-300);
    let norm = integrate(
        |m| Complex64::new(minkowski_gaussian_overlap(m, &spec).unwrap().norm_sqr(), 0.0),
        spec.cutoff,
        inputs.inner_limit(),
        &cfg,
    )
    .unwrap()
    .value
    .re
    .powf(-0.5);
    for k in [0.5, 0.8] {
        let direct = integrate(
            |m| minkowski_gaussian_overlap(m, &spec).unwrap() * log_bogoliubov(k, m, accel).unwrap().unwrap().exp(),
            spec.cutoff,
            inputs.inner_limit(),
            &cfg,
        )
        .unwrap();
        let want = direct.value * norm;
        let got = engine.spectrum(SpectrumKind::B, k).unwrap().value;
        assert!((got - want).norm() <= 1e-6 * want.norm(), "k = {k}: {got} vs {want}");
    }
}

#[test]
fn norm_independent_of_packet_centre() {
    let cfg = QuadratureConfig::with_tolerances(1e-12, 1e-300);
    let norm_at = |centre: f64| {
        let spec = WavePacketSpec::new(6.0, 0.5, horizon::modes::Direction::Right, centre).unwrap();
        integrate(|m| Complex64::new(minkowski_gaussian_overlap(m, &spec).unwrap().norm_sqr(), 0.0), 0.5, 18.0, &cfg)
            .unwrap()
            .value
            .re
    };
    let base = norm_at(0.0);
    for c in [-30.0, 1.0, 1e3] {
        assert!((norm_at(c) - base).abs() <= 1e-13 * base);
    }
}

#[test]
fn unruh_occupation_increases_with_acceleration() {
    let grid = log_grid(0.01, 100.0, 9);
    let logs: Vec<f64> = grid.iter().map(|&a| overlaps(a).log_n_unruh).collect();
    for (w, a) in logs.windows(2).zip(&grid) {
        assert!(w[1] > w[0], "log n_U not increasing after a = {a}: {logs:?}");
    }
}

#[test]
fn halving_tolerance_stays_within_error_estimates() {
    let a = 1.0;
    let q = ScenarioInputs::default_quadrature();
    let coarse = compute_overlaps(&ScenarioInputs::new(a, 6.0, 0.5, q).unwrap()).unwrap();
    let fine_q = QuadratureConfig { rel_tol: q.rel_tol / 2.0, ..q };
    let fine = compute_overlaps(&ScenarioInputs::new(a, 6.0, 0.5, fine_q).unwrap()).unwrap();
    assert!(coarse.converged() && fine.converged());
    let e = &coarse.errors;
    let check = |name: &str, d: f64, bound: f64| assert!(d <= bound, "{name}: change {d:e} exceeds estimate {bound:e}");
    check("alpha", (fine.alpha - coarse.alpha).norm(), e.alpha);
    check("beta", (fine.beta - coarse.beta).norm(), e.beta);
    check("alpha'", (fine.alpha_prime - coarse.alpha_prime).norm(), e.alpha_prime);
    check("beta'", (fine.beta_prime - coarse.beta_prime).norm(), e.beta_prime);
    check("n_unruh", (fine.n_unruh - coarse.n_unruh).abs(), e.n_unruh_rel * coarse.n_unruh);
    check("norm_r", (fine.norm_r - coarse.norm_r).abs(), e.norm_r);
    check("norm_a", (fine.norm_a - coarse.norm_a).abs(), e.norm_a.max(f64::EPSILON));
    check("norm_b", (fine.norm_b - coarse.norm_b).abs(), e.norm_b.max(f64::EPSILON));
}

#[test]
fn degenerate_inputs_refused() {
    let q = ScenarioInputs::default_quadrature();
    assert!(ScenarioInputs::new(1.0, 6.0, 18.5, q).is_err());
    assert!(ScenarioInputs::new(5e3, 6.0, 0.5, q).is_err());
    assert!(ScenarioInputs::new(1.0, 6.0, 0.5, QuadratureConfig { rel_tol: 0.0, ..q }).is_err());
}
