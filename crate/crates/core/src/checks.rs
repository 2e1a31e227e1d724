//! Randomized invariant suites: analytic gradients against finite
//! differences, and positive definiteness of `M_δ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly;
use crate::energy::{self, SimState};
use crate::mesh::{FreeKnotFn, Partition};
use crate::problem::{Preset, PresetName, SourceTerm};
use crate::{Error, Result};

/// Central-difference step relative to the local scale of each coordinate.
pub const FD_STEP: f64 = 1e-6;

/// Typical magnitude of nodal values for random states of a preset.
fn amplitude(name: PresetName) -> f64 {
    match name {
        PresetName::Example1 => 1.5,
        PresetName::Example2 => 9.0,
        PresetName::Example3 | PresetName::Example4 | PresetName::AllenCahn(_) => 1.2,
        PresetName::LinearDiffusion => 1.0,
    }
}

/// A random state with element lengths within a factor of a few of uniform
/// and no node within `1e−3 (b − a)` of a point load.
pub fn random_state(preset: &Preset, n: usize, rng: &mut impl Rng) -> Result<SimState> {
    let prob = &preset.problem;
    let (a, b) = prob.domain;
    let avoid = match prob.source {
        SourceTerm::Dirac { location, .. } => Some(location),
        _ => None,
    };
    let amp = amplitude(preset.name);
    loop {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.0)).collect();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut interior = Vec::with_capacity(n - 1);
        for wi in &w[..n - 1] {
            acc += wi;
            interior.push(a + (b - a) * acc / total);
        }
        if let Some(x0) = avoid {
            if interior.iter().any(|x| (x - x0).abs() < 1e-3 * (b - a)) {
                continue;
            }
        }
        let partition = Partition::new(a, b, &interior)?;
        let mut values: Vec<f64> = (0..=n).map(|_| rng.gen_range(-amp..amp)).collect();
        values[0] = prob.boundary.0;
        values[n] = prob.boundary.1;
        return Ok(SimState::new(0.0, FreeKnotFn::new(partition, values)?));
    }
}

/// `‖a − b‖_∞ / ‖b‖_∞`, with the denominator floored at `1e−8`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub preset: String,
    pub states: usize,
    pub max_rel_u: f64,
    pub max_rel_x: f64,
}

impl GradientCheck {
    pub fn max_rel(&self) -> f64 {
        self.max_rel_u.max(self.max_rel_x)
    }
}

/// Compare analytic `∂E_δ̃` with central differences on random states.
pub fn gradient_check(preset: &Preset, states: usize, n: usize, seed: u64) -> Result<GradientCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = preset.defaults.delta_tilde;
    let mut max_rel_u: f64 = 0.0;
    let mut max_rel_x: f64 = 0.0;
    for _ in 0..states {
        let s = random_state(preset, n, &mut rng)?;
        let g = energy::gradient(&s, &preset.problem, dt)?;
        let fd = energy::fd_gradient_oracle(&s, &preset.problem, dt, FD_STEP)?;
        max_rel_u = max_rel_u.max(relative_error(&g.de_du, &fd.de_du));
        max_rel_x = max_rel_x.max(relative_error(&g.de_dx, &fd.de_dx));
    }
    Ok(GradientCheck { preset: preset.name.to_string(), states, max_rel_u, max_rel_x })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessCheck {
    pub states: usize,
    pub failures: usize,
    pub min_pivot: f64,
}

/// Factor `M_δ` on random states and collect the smallest pivot.
pub fn definiteness_check(preset: &Preset, states: usize, n: usize, delta: f64, seed: u64) -> Result<DefinitenessCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut min_pivot = f64::INFINITY;
    for _ in 0..states {
        let s = random_state(preset, n, &mut rng)?;
        match assembly::assemble(&s, delta)?.cholesky() {
            Ok(f) => min_pivot = f.pivots().iter().copied().fold(min_pivot, f64::min),
            Err(Error::NotPositiveDefinite { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(DefinitenessCheck { states, failures, min_pivot })
}

/// `true` when `M_0` fails to factor on a constant state, the degenerate
/// direction in which moving nodes does not change `u_h`.
pub fn constant_state_is_singular(n: usize) -> Result<bool> {
    let p = Partition::uniform(0.0, 1.0, n)?;
    let s = SimState::new(0.0, FreeKnotFn::interpolate(|_| 0.0, p));
    Ok(matches!(assembly::assemble(&s, 0.0)?.cholesky(), Err(Error::NotPositiveDefinite { .. })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::preset;

    #[test]
    fn random_states_avoid_the_point_load() {
        let pr = preset(PresetName::Example1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = random_state(&pr, 10, &mut rng).unwrap();
            assert!(s.partition().interior().iter().all(|x| (x - 0.5).abs() >= 1e-3));
            assert_eq!(s.fun.values()[0], 0.0);
            s.partition().check_nondegenerate().unwrap();
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1.1, 2.0], &[1.0, 2.0]) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn singular_without_stabilisation() {
        assert!(constant_state_is_singular(6).unwrap());
    }
}
