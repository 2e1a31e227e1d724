//! Discrete energy, the log-spacing penalty and their gradients.
//!
//! Gradients are taken element by element. For the node position `x_k`,
//! only the two adjacent elements move: the Dirichlet term contributes
//! `(α/2)(s_k² − s_{k−1}²)` (right slope squared minus left slope squared),
//! and integrals of `F(x, u_h)` or `g u_h` contribute `∫ f β_k` and `∫ g β_k`
//! because the endpoint terms of the two elements cancel.

use crate::mesh::{FreeKnotFn, Partition};
use crate::problem::{ProblemSpec, SourceTerm};
use crate::quadrature::GAUSS3;
use crate::{Error, Result};

/// Time plus the free-knot function carrying the `2(N−1)` unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub fun: FreeKnotFn,
}

impl SimState {
    pub fn new(t: f64, fun: FreeKnotFn) -> Self {
        Self { t, fun }
    }

    #[inline]
    pub fn partition(&self) -> &Partition {
        self.fun.partition()
    }

    #[inline]
    pub fn elements(&self) -> usize {
        self.fun.elements()
    }

    /// Same boundary data, new unknowns.
    pub fn with_unknowns(&self, t: f64, u: &[f64], x: &[f64]) -> Result<Self> {
        Ok(Self { t, fun: FreeKnotFn::from_unknowns(&self.fun, u, x)? })
    }
}

/// Gradient of the penalised energy with respect to the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub de_du: Vec<f64>,
    pub de_dx: Vec<f64>,
    /// Unpenalised energy `E_h`.
    pub energy: f64,
    pub penalty: f64,
}

impl GradReport {
    pub fn penalized_energy(&self) -> f64 {
        self.energy + self.penalty
    }

    /// `max_k max(|∂E/∂u_k|, |∂E/∂x_k|)`.
    pub fn max_abs(&self) -> f64 {
        self.de_du.iter().chain(&self.de_dx).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.energy.is_finite()
            && self.penalty.is_finite()
            && self.de_du.iter().chain(&self.de_dx).all(|v| v.is_finite())
    }
}

fn nondegenerate(fun: &FreeKnotFn) -> Result<()> {
    fun.partition().check_nondegenerate()
}

/// `E_h = Σ_e ∫ (α/2)(∂_x u_h)² + F(x, u_h) dx − ⟨g, u_h⟩`.
pub fn energy(state: &SimState, prob: &ProblemSpec) -> Result<f64> {
    nondegenerate(&state.fun)?;
    Ok(energy_unchecked(&state.fun, prob))
}

fn energy_unchecked(fun: &FreeKnotFn, prob: &ProblemSpec) -> f64 {
    let p = fun.partition();
    let xs = p.nodes();
    let mut total = 0.0;
    for e in 0..fun.elements() {
        let h = p.h(e);
        let s = fun.slope(e);
        total += 0.5 * prob.alpha * s * s * h;
        if !prob.reaction.is_zero() {
            total += GAUSS3.integrate(xs[e], xs[e + 1], |x| prob.reaction.density(x, fun.eval_on(e, x)));
        }
        if let SourceTerm::Smooth(g) = &prob.source {
            total -= GAUSS3.integrate(xs[e], xs[e + 1], |x| g(x) * fun.eval_on(e, x));
        }
    }
    if let SourceTerm::Dirac { location, weight } = prob.source {
        if let Ok(v) = fun.eval(location) {
            total -= weight * v;
        }
    }
    total
}

/// `(δ̃/N) Σ_e ln(N h_e / L)²` over all `N` elements, `L = b − a`.
pub fn penalty_energy(p: &Partition, delta_tilde: f64) -> Result<f64> {
    p.check_nondegenerate()?;
    Ok(penalty_unchecked(p, delta_tilde))
}

fn penalty_unchecked(p: &Partition, delta_tilde: f64) -> f64 {
    if delta_tilde == 0.0 {
        return 0.0;
    }
    let n = p.elements() as f64;
    let l = p.length();
    let sum: f64 = p.element_lengths().map(|h| (n * h / l).ln().powi(2)).sum();
    delta_tilde / n * sum
}

/// `E_δ̃ = E_h + penalty`.
pub fn penalized_energy(state: &SimState, prob: &ProblemSpec, delta_tilde: f64) -> Result<f64> {
    nondegenerate(&state.fun)?;
    Ok(energy_unchecked(&state.fun, prob) + penalty_unchecked(state.partition(), delta_tilde))
}

/// `∂E_h/∂u_k = ∫ α ∂_x u_h ∂_x φ_k + f(x, u_h) φ_k dx − ⟨g, φ_k⟩`.
pub fn grad_u(state: &SimState, prob: &ProblemSpec) -> Result<Vec<f64>> {
    Ok(gradient(state, prob, 0.0)?.de_du)
}

/// `∂E_δ̃/∂x_k`, including the slope-jump and penalty terms.
pub fn grad_x(state: &SimState, prob: &ProblemSpec, delta_tilde: f64) -> Result<Vec<f64>> {
    Ok(gradient(state, prob, delta_tilde)?.de_dx)
}

/// Both gradient blocks plus the energies, in one sweep over the elements.
pub fn gradient(state: &SimState, prob: &ProblemSpec, delta_tilde: f64) -> Result<GradReport> {
    let fun = &state.fun;
    nondegenerate(fun)?;
    let p = fun.partition();
    let xs = p.nodes();
    let n = fun.elements();
    let alpha = prob.alpha;
    // node-indexed accumulators, boundary entries discarded at the end
    let mut du = vec![0.0; n + 1];
    let mut dx = vec![0.0; n + 1];
    let smooth = match &prob.source {
        SourceTerm::Smooth(g) => Some(g),
        _ => None,
    };
    let has_reaction = !prob.reaction.is_zero();

    for e in 0..n {
        let (xl, xr) = (xs[e], xs[e + 1]);
        let h = xr - xl;
        let s = fun.slope(e);
        // ∫ α s ∂_x φ over the element: −α s at the left node, +α s at the right
        du[e] -= alpha * s;
        du[e + 1] += alpha * s;
        // d/dh of (α/2) s² h at fixed nodal values
        dx[e + 1] -= 0.5 * alpha * s * s;
        dx[e] += 0.5 * alpha * s * s;

        if has_reaction || smooth.is_some() {
            // per-element integrals of the load against the two local hats;
            // β on this element is −s times the same hats
            let mut load_l = 0.0;
            let mut load_r = 0.0;
            for q in 0..3 {
                let t = GAUSS3.nodes[q];
                let x = xl + h * t;
                let u = fun.values()[e] * (1.0 - t) + fun.values()[e + 1] * t;
                let mut load = 0.0;
                if has_reaction {
                    load += prob.reaction.force(x, u);
                }
                if let Some(g) = smooth {
                    load -= g(x);
                }
                let w = GAUSS3.weights[q] * h;
                load_l += w * load * (1.0 - t);
                load_r += w * load * t;
            }
            du[e] += load_l;
            du[e + 1] += load_r;
            dx[e] -= s * load_l;
            dx[e + 1] -= s * load_r;
        }
    }

    if let SourceTerm::Dirac { location, weight } = prob.source {
        dirac_gradient(fun, location, weight, &mut du, &mut dx)?;
    }

    let mut penalty = 0.0;
    if delta_tilde != 0.0 {
        let nf = n as f64;
        let l = p.length();
        for e in 0..n {
            let h = p.h(e);
            let lg = (nf * h / l).ln();
            penalty += lg * lg;
            let d = 2.0 * delta_tilde / nf * lg / h;
            dx[e + 1] += d;
            dx[e] -= d;
        }
        penalty *= delta_tilde / nf;
    }

    let energy = energy_unchecked(fun, prob);
    let report = GradReport {
        de_du: du[1..n].to_vec(),
        de_dx: dx[1..n].to_vec(),
        energy,
        penalty,
    };
    Ok(report)
}

/// Gradient of `−w u_h(a₀)`. Inside an element only its two nodes see the
/// load; a node sitting exactly on `a₀` gets the mean of the two one-sided
/// position derivatives.
fn dirac_gradient(fun: &FreeKnotFn, a0: f64, w: f64, du: &mut [f64], dx: &mut [f64]) -> Result<()> {
    let p = fun.partition();
    let xs = p.nodes();
    let e = p.locate(a0)?;
    let n = fun.elements();
    if a0 == xs[e + 1] && e + 1 < n {
        let k = e + 1;
        du[k] -= w;
        // β_k(x_k) is −s_left from the left element and −s_right from the right
        let mean_beta = -0.5 * (fun.slope(e) + fun.slope(k));
        dx[k] -= w * mean_beta;
        return Ok(());
    }
    let h = p.h(e);
    let t = (a0 - xs[e]) / h;
    let s = fun.slope(e);
    du[e] -= w * (1.0 - t);
    du[e + 1] -= w * t;
    dx[e] += w * s * (1.0 - t);
    dx[e + 1] += w * s * t;
    Ok(())
}

/// Central-difference gradient of `E_δ̃`.
///
/// Each `u_k` is perturbed by `h · max(1, |u_k|)` and each `x_k` by
/// `h · min(h_{k−1}, h_k)`.
pub fn fd_gradient_oracle(
    state: &SimState,
    prob: &ProblemSpec,
    delta_tilde: f64,
    h: f64,
) -> Result<GradReport> {
    let fun = &state.fun;
    nondegenerate(fun)?;
    let p = fun.partition();
    let n = fun.elements();
    let u0 = fun.interior_values().to_vec();
    let x0 = p.interior().to_vec();
    let eval = |u: &[f64], x: &[f64]| -> Result<f64> {
        let f = FreeKnotFn::from_unknowns(fun, u, x)?;
        Ok(energy_unchecked(&f, prob) + penalty_unchecked(f.partition(), delta_tilde))
    };

    let mut de_du = Vec::with_capacity(n - 1);
    let mut u = u0.clone();
    for k in 0..n - 1 {
        let step = h * u0[k].abs().max(1.0);
        u[k] = u0[k] + step;
        let plus = eval(&u, &x0)?;
        u[k] = u0[k] - step;
        let minus = eval(&u, &x0)?;
        u[k] = u0[k];
        de_du.push((plus - minus) / (2.0 * step));
    }

    let mut de_dx = Vec::with_capacity(n - 1);
    let mut x = x0.clone();
    for k in 0..n - 1 {
        let step = h * p.h(k).min(p.h(k + 1));
        x[k] = x0[k] + step;
        let plus = eval(&u0, &x).map_err(|_| Error::PerturbationBreaksOrdering { index: k + 1 })?;
        x[k] = x0[k] - step;
        let minus = eval(&u0, &x).map_err(|_| Error::PerturbationBreaksOrdering { index: k + 1 })?;
        x[k] = x0[k];
        de_dx.push((plus - minus) / (2.0 * step));
    }

    Ok(GradReport {
        de_du,
        de_dx,
        energy: energy_unchecked(fun, prob),
        penalty: penalty_unchecked(p, delta_tilde),
    })
}
