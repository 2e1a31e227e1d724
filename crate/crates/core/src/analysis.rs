//! Error norms, empirical convergence orders and a best free-knot
//! approximation oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::FreeKnotFn;
use crate::problem::ExactSolution;
use crate::quadrature::GAUSS5;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub n: usize,
    pub err_h1: f64,
    pub err_l2: f64,
    /// `|E_h − σ|` for stationary references.
    pub err_energy: Option<f64>,
}

/// Sorted union of the nodes of `fun` and the interior breakpoints.
fn refined_nodes(fun: &FreeKnotFn, breakpoints: &[f64]) -> Vec<f64> {
    let p = fun.partition();
    let (a, b) = (p.a(), p.b());
    let mut pts: Vec<f64> = p.nodes().to_vec();
    pts.extend(breakpoints.iter().copied().filter(|&x| a < x && x < b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn integrate_error(fun: &FreeKnotFn, breakpoints: &[f64], mut sq: impl FnMut(usize, f64) -> f64) -> f64 {
    let pts = refined_nodes(fun, breakpoints);
    let part = fun.partition();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let e = part.locate(0.5 * (w[0] + w[1])).expect("midpoint inside domain");
        total += GAUSS5.integrate(w[0], w[1], |x| sq(e, x));
    }
    total.max(0.0).sqrt()
}

/// `(∫ (∂_x u − ∂_x u_h)²)^{1/2}` at time `t`.
pub fn h1_error(fun: &FreeKnotFn, exact: &ExactSolution, t: f64) -> f64 {
    integrate_error(fun, &exact.breakpoints, |e, x| {
        let d = exact.x_derivative(t, x) - fun.slope(e);
        d * d
    })
}

/// `(∫ (u − u_h)²)^{1/2}` at time `t`.
pub fn l2_error(fun: &FreeKnotFn, exact: &ExactSolution, t: f64) -> f64 {
    integrate_error(fun, &exact.breakpoints, |e, x| {
        let d = exact.value(t, x) - fun.eval_on(e, x);
        d * d
    })
}

pub fn energy_error(discrete: f64, exact: f64) -> f64 {
    (discrete - exact).abs()
}

/// Full error report; the energy error is filled when the reference carries
/// a stationary energy and `energy` is given.
pub fn error_report(fun: &FreeKnotFn, exact: &ExactSolution, t: f64, energy: Option<f64>) -> ErrorReport {
    ErrorReport {
        n: fun.elements(),
        err_h1: h1_error(fun, exact, t),
        err_l2: l2_error(fun, exact, t),
        err_energy: exact.stationary_energy.zip(energy).map(|(s, e)| energy_error(e, s)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub n: usize,
    pub err: f64,
    /// `ln(err_{i−1}/err_i) / ln(N_i/N_{i−1})`; absent on the first row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub norm_label: String,
    pub rows: Vec<OrderRow>,
}

impl OrderTable {
    /// Mean of the last `k` orders (fewer if the table is shorter).
    pub fn mean_last(&self, k: usize) -> Option<f64> {
        let orders: Vec<f64> = self.rows.iter().filter_map(|r| r.order).collect();
        let tail = &orders[orders.len().saturating_sub(k)..];
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

pub fn orders(rows: &[(usize, f64)], norm_label: &str) -> Result<OrderTable> {
    for &(_, err) in rows {
        if !(err > 0.0) {
            return Err(Error::NonpositiveError(err));
        }
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidConfig("N must be strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, &(n, err)) in rows.iter().enumerate() {
        let order = (i > 0).then(|| {
            let (n0, e0) = rows[i - 1];
            (e0 / err).ln() / (n as f64 / n0 as f64).ln()
        });
        out.push(OrderRow { n, err, order });
    }
    Ok(OrderTable { norm_label: norm_label.to_string(), rows: out })
}

/// Interval `[lo, hi]` holding the central `fraction` of `∫ (∂_x u_h)²`,
/// with `(1 − fraction)/2` of it on either side. `None` when `u_h` is flat.
pub fn seminorm_span(fun: &FreeKnotFn, fraction: f64) -> Option<(f64, f64)> {
    let p = fun.partition();
    let dens: Vec<f64> = (0..fun.elements()).map(|e| fun.slope(e).powi(2)).collect();
    let total: f64 = dens.iter().enumerate().map(|(e, d)| d * p.h(e)).sum();
    if !(total > 0.0) {
        return None;
    }
    let tail = 0.5 * (1.0 - fraction.clamp(0.0, 1.0)) * total;
    // position where the cumulative integral first reaches `level`
    let quantile = |level: f64| {
        let mut acc = 0.0;
        for (e, d) in dens.iter().enumerate() {
            let piece = d * p.h(e);
            if piece > 0.0 && acc + piece >= level {
                return p.nodes()[e] + (level - acc) / d;
            }
            acc += piece;
        }
        p.b()
    };
    Some((quantile(tail), quantile(total - tail)))
}

/// Outcome of the best-approximation search.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaReport {
    /// Best H1-seminorm error found; an upper bound on `σ_N`.
    pub value: f64,
    /// Interior knots of the best layout.
    pub knots: Vec<f64>,
    /// Set when some start hit the sweep limit before converging.
    pub stalled: bool,
}

/// Cumulative `∫ u'²` on a fine panel grid, for `|u|²_{H¹}`.
fn seminorm_squared(du: &dyn Fn(f64) -> f64, a: f64, b: f64, breakpoints: &[f64]) -> f64 {
    const PANELS: usize = 20_000;
    let mut pts: Vec<f64> = (0..=PANELS).map(|i| a + (b - a) * i as f64 / PANELS as f64).collect();
    pts.extend(breakpoints.iter().copied().filter(|&x| a < x && x < b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|w| {
            GAUSS5.integrate(w[0], w[1], |x| {
                let d = du(x);
                d * d
            })
        })
        .sum()
}

/// Approximate `σ_N(u) = inf |u − v_h|_{H¹}` over free-knot piecewise-linear
/// `v_h` with `N` elements.
///
/// For fixed knots the H¹-seminorm projection in 1D is the nodal
/// interpolant, so `|u − I_h u|² = |u|² − Σ_e (Δu_e)²/h_e` and only the
/// knots need optimising. Each start runs coordinate ascent on
/// `Σ_e (Δu_e)²/h_e`, one knot at a time: a coarse scan of the admissible
/// interval followed by golden-section refinement around the best sample.
/// Five random initial layouts are tried and the best result kept.
pub fn sigma_n_oracle(
    exact: &ExactSolution,
    t: f64,
    domain: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<SigmaReport> {
    let (a, b) = domain;
    if !(a < b) {
        return Err(Error::InvalidBounds { a, b });
    }
    if n < 2 {
        return Err(Error::InvalidSize(n));
    }
    let u = |x: f64| exact.value(t, x);
    let du = |x: f64| exact.x_derivative(t, x);
    let total = seminorm_squared(&du, a, b, &exact.breakpoints);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stalled = false;
    for _ in 0..5 {
        let mut knots: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(a..b)).collect();
        knots.sort_by(f64::total_cmp);
        // keep the random layout strictly ordered
        for i in 0..knots.len() {
            let lo = if i == 0 { a } else { knots[i - 1] };
            if knots[i] <= lo {
                knots[i] = lo + 1e-9 * (b - a);
            }
        }
        let (gain, converged) = ascend(&u, a, b, &mut knots);
        stalled |= !converged;
        if best.as_ref().is_none_or(|(g, _)| gain > *g) {
            best = Some((gain, knots));
        }
    }
    let (gain, knots) = best.expect("five starts");
    Ok(SigmaReport { value: (total - gain).max(0.0).sqrt(), knots, stalled })
}

fn pair_gain(u: &dyn Fn(f64) -> f64, xl: f64, ul: f64, x: f64, xr: f64, ur: f64) -> f64 {
    let ux = u(x);
    (ux - ul).powi(2) / (x - xl) + (ur - ux).powi(2) / (xr - x)
}

/// Coordinate ascent on `Σ (Δu)²/h`. Returns the final objective and
/// whether the sweeps converged.
fn ascend(u: &dyn Fn(f64) -> f64, a: f64, b: f64, knots: &mut [f64]) -> (f64, bool) {
    const SWEEPS: usize = 400;
    const SCAN: usize = 24;
    let m = knots.len();
    let objective = |k: &[f64]| -> f64 {
        let mut xs = Vec::with_capacity(m + 2);
        xs.push(a);
        xs.extend_from_slice(k);
        xs.push(b);
        xs.windows(2).map(|w| (u(w[1]) - u(w[0])).powi(2) / (w[1] - w[0])).sum()
    };
    let mut current = objective(knots);
    for _ in 0..SWEEPS {
        for i in 0..m {
            let xl = if i == 0 { a } else { knots[i - 1] };
            let xr = if i + 1 == m { b } else { knots[i + 1] };
            let (ul, ur) = (u(xl), u(xr));
            let width = xr - xl;
            let f = |x: f64| pair_gain(u, xl, ul, x, xr, ur);
            let mut best_x = knots[i];
            let mut best_f = f(best_x);
            for j in 1..SCAN {
                let x = xl + width * j as f64 / SCAN as f64;
                let v = f(x);
                if v > best_f {
                    best_f = v;
                    best_x = x;
                }
            }
            // golden section on the bracket around the best sample
            let step = width / SCAN as f64;
            let mut lo = (best_x - step).max(xl + 1e-12 * width);
            let mut hi = (best_x + step).min(xr - 1e-12 * width);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = hi - g * (hi - lo);
            let mut d = lo + g * (hi - lo);
            let (mut fc, mut fd) = (f(c), f(d));
            for _ in 0..60 {
                if fc > fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - g * (hi - lo);
                    fc = f(c);
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + g * (hi - lo);
                    fd = f(d);
                }
            }
            let x = 0.5 * (lo + hi);
            if f(x) > best_f {
                best_x = x;
            }
            knots[i] = best_x;
        }
        let next = objective(knots);
        let improved = next - current;
        current = next;
        if improved <= 1e-13 * current.abs().max(1.0) {
            return (current, true);
        }
    }
    (current, false)
}
