// Levin collocation for ∫ f(x) e^{iθ(x)} dx on a panel without stationary points.
//
// Solves p' + iθ' p = f on Chebyshev–Lobatto nodes; the integral is then
// p(b) e^{iθ(b)} - p(a) e^{iθ(a)}.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(super) struct ChebGrid {
    /// Lobatto nodes on [-1, 1], t_0 = 1 down to t_{n-1} = -1.
    pub nodes: Vec<f64>,
    diff: DMatrix<f64>,
}

impl ChebGrid {
    fn new(n: usize) -> Self {
        let m = n - 1;
        let nodes: Vec<f64> = (0..n).map(|j| (std::f64::consts::PI * j as f64 / m as f64).cos()).collect();
        let weight = |j: usize| {
            let c = if j == 0 || j == m { 2.0 } else { 1.0 };
            if j % 2 == 0 { c } else { -c }
        };
        let mut diff = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i != j {
                    let d = weight(i) / weight(j) / (nodes[i] - nodes[j]);
                    diff[(i, j)] = d;
                    row_sum += d;
                }
            }
            // negative-sum trick keeps D·1 = 0 to rounding
            diff[(i, i)] = -row_sum;
        }
        Self { nodes, diff }
    }
}

pub(super) const LOW_ORDER: usize = 20;
pub(super) const HIGH_ORDER: usize = 28;

pub(super) fn grid(n: usize) -> &'static ChebGrid {
    static LOW: OnceLock<ChebGrid> = OnceLock::new();
    static HIGH: OnceLock<ChebGrid> = OnceLock::new();
    match n {
        LOW_ORDER => LOW.get_or_init(|| ChebGrid::new(LOW_ORDER)),
        HIGH_ORDER => HIGH.get_or_init(|| ChebGrid::new(HIGH_ORDER)),
        _ => unreachable!("unsupported Levin order {n}"),
    }
}

/// One Levin solve on `[a, b]`. `None` when the collocation matrix is singular.
pub(super) fn levin_panel(
    f: &dyn Fn(f64) -> Complex64,
    rate: &dyn Fn(f64) -> f64,
    phase: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid: &ChebGrid,
) -> Option<Complex64> {
    let n = grid.nodes.len();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let xs: Vec<f64> = grid.nodes.iter().map(|t| mid + half * t).collect();
    let inv_half = 1.0 / half;
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(grid.diff[(i, j)] * inv_half, 0.0);
        }
        m[(i, i)] += Complex64::new(0.0, rate(xs[i]));
    }
    let rhs = DVector::<Complex64>::from_iterator(n, xs.iter().map(|&x| f(x)));
    let p = m.lu().solve(&rhs)?;
    if !p.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    let top = p[0] * Complex64::cis(phase(b));
    let bottom = p[n - 1] * Complex64::cis(phase(a));
    Some(top - bottom)
}
