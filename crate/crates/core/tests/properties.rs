//! Cross-module invariants on randomized inputs.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mfem_core::analysis;
use mfem_core::assembly;
use mfem_core::checks;
use mfem_core::energy;
use mfem_core::integrator::{self, RunConfig, ENERGY_SLACK};
use mfem_core::mesh::{FreeKnotFn, Partition};
use mfem_core::problem::{preset, ExactSolution, PresetName};

fn preset_strategy() -> impl Strategy<Value = PresetName> {
    prop_oneof![
        Just(PresetName::Example1),
        Just(PresetName::Example2),
        Just(PresetName::Example3),
        Just(PresetName::Example4),
        Just(PresetName::LinearDiffusion),
    ]
}

/// Interior nodes on `(0, 1)` built from positive gap weights.
fn partition_strategy() -> impl Strategy<Value = Partition> {
    prop::collection::vec(0.05f64..1.0, 2..16).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let interior: Vec<f64> = w[..w.len() - 1]
            .iter()
            .map(|g| {
                acc += g;
                acc / total
            })
            .collect();
        Partition::new(0.0, 1.0, &interior).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analytic_gradient_matches_finite_differences(name in preset_strategy(), seed in any::<u64>(), n in 3usize..14) {
        let pr = preset(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = checks::random_state(&pr, n, &mut rng).unwrap();
        let g = energy::gradient(&s, &pr.problem, pr.defaults.delta_tilde).unwrap();
        let fd = energy::fd_gradient_oracle(&s, &pr.problem, pr.defaults.delta_tilde, checks::FD_STEP).unwrap();
        prop_assert!(checks::relative_error(&g.de_du, &fd.de_du) <= 1e-6);
        prop_assert!(checks::relative_error(&g.de_dx, &fd.de_dx) <= 1e-6);
    }

    #[test]
    fn stabilised_dissipation_matrix_is_positive_definite(name in preset_strategy(), seed in any::<u64>(), n in 2usize..20) {
        let pr = preset(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = checks::random_state(&pr, n, &mut rng).unwrap();
        let chol = assembly::assemble(&s, 1e-4).unwrap().cholesky().unwrap();
        prop_assert!(chol.pivots().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn penalty_vanishes_only_on_uniform_meshes(p in partition_strategy()) {
        let n = p.elements();
        let uniform = Partition::uniform(0.0, 1.0, n).unwrap();
        prop_assert!(energy::penalty_energy(&uniform, 0.01).unwrap().abs() < 1e-14);
        let spread = p.element_lengths().fold(0.0f64, |m, h| m.max((h * n as f64 - 1.0).abs()));
        if spread > 1e-6 {
            prop_assert!(energy::penalty_energy(&p, 0.01).unwrap() > 0.0);
        }
    }

    #[test]
    fn orders_ignore_a_common_error_scale(errs in prop::collection::vec(1e-6f64..10.0, 2..6), scale in 1e-3f64..1e3) {
        let rows: Vec<(usize, f64)> = errs.iter().enumerate().map(|(i, &e)| (5 << i, e)).collect();
        let scaled: Vec<(usize, f64)> = rows.iter().map(|&(n, e)| (n, e * scale)).collect();
        let a = analysis::orders(&rows, "x").unwrap();
        let b = analysis::orders(&scaled, "x").unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            match (ra.order, rb.order) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs())),
                (None, None) => {}
                _ => prop_assert!(false, "order presence differs"),
            }
        }
    }

    #[test]
    fn h1_error_is_unchanged_by_refining_the_same_function(p in partition_strategy(), c in -2.0f64..2.0) {
        // piecewise quadratic reference with a kink at 0.3
        let exact = ExactSolution {
            value: Arc::new(move |_, x: f64| if x < 0.3 { c * x * x } else { c * 0.09 + (x - 0.3) }),
            x_derivative: Arc::new(move |_, x: f64| if x < 0.3 { 2.0 * c * x } else { 1.0 }),
            breakpoints: vec![0.3],
            stationary_energy: None,
        };
        let f = FreeKnotFn::interpolate(|x| (exact.value)(0.0, x), p.clone());
        let mut fine = p.interior().to_vec();
        fine.extend(p.nodes().windows(2).map(|w| 0.5 * (w[0] + w[1])));
        fine.sort_by(f64::total_cmp);
        let refined = Partition::new(0.0, 1.0, &fine).unwrap();
        let g = FreeKnotFn::interpolate(|x| f.eval(x).unwrap(), refined);
        let (e1, e2) = (analysis::h1_error(&f, &exact, 0.0), analysis::h1_error(&g, &exact, 0.0));
        prop_assert!((e1 - e2).abs() < 1e-10, "{e1} vs {e2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_decrease_energy_and_keep_nodes_ordered(
        name in prop_oneof![Just(PresetName::Example1), Just(PresetName::Example3), Just(PresetName::LinearDiffusion)],
        n in 3usize..12,
        log_dt in -5.0f64..-2.0,
    ) {
        let pr = preset(name).unwrap();
        let mut cfg = RunConfig::from_preset(&pr, n);
        cfg.dt = 10f64.powf(log_dt);
        cfg.t_end = Some(20.0 * cfg.dt);
        cfg.stationary_tol = None;
        cfg.snapshot_times.clear();
        let traj = integrator::run_preset(&pr, &cfg).unwrap();
        prop_assert!(traj.stats.max_energy_increase <= ENERGY_SLACK);
        prop_assert!(traj.energy_series.windows(2).all(|w| w[1].penalized <= w[0].penalized + ENERGY_SLACK));
        prop_assert!(traj.node_series.iter().all(|(_, x)| x.windows(2).all(|w| w[0] < w[1])));
    }
}

// Example 1 is left out: its symmetric saddle and the point-load kink split
// trajectories into dt-dependent branches.
#[test]
fn smooth_flows_are_first_order_in_dt() {
    for name in [PresetName::LinearDiffusion, PresetName::Example3] {
        let pr = preset(name).unwrap();
        let run = |dt: f64| {
            let mut cfg = RunConfig::from_preset(&pr, 9);
            cfg.dt = dt;
            cfg.t_end = Some(0.04);
            cfg.stationary_tol = None;
            cfg.snapshot_times.clear();
            integrator::run_preset(&pr, &cfg).unwrap().final_state
        };
        let states: Vec<_> = [4e-5, 2e-5, 1e-5].iter().map(|&dt| run(dt)).collect();
        // nodal max-norm; an H1 distance would only see sqrt(dt) through the
        // displaced kinks
        let dist = |a: &energy::SimState, b: &energy::SimState| {
            let du = a.fun.values().iter().zip(b.fun.values()).map(|(p, q)| (p - q).abs());
            let dx = a.partition().nodes().iter().zip(b.partition().nodes()).map(|(p, q)| (p - q).abs());
            du.chain(dx).fold(0.0, f64::max)
        };
        let d1 = dist(&states[0], &states[1]);
        let d2 = dist(&states[1], &states[2]);
        let ratio = d1 / d2;
        assert!((1.8..=2.2).contains(&ratio), "{name:?}: {d1:e} / {d2:e} = {ratio}");
    }
}

#[test]
fn best_approximation_improves_with_more_knots() {
    let pr = preset(PresetName::Example3).unwrap();
    let ex = pr.exact.as_ref().unwrap();
    let values: Vec<f64> = [5usize, 10, 20]
        .iter()
        .map(|&n| analysis::sigma_n_oracle(ex, 0.0, pr.problem.domain, n, 9).unwrap().value)
        .collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
}
