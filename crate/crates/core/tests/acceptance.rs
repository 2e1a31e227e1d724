//! Acceptance gate. Each criterion prints one `PASS`/`FAIL` line and then
//! asserts it. Run with `cargo test -p mfem-core --test acceptance`.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::sync::{OnceLock, RwLock};
use std::time::Instant;

use mfem_core::analysis::{self, OrderTable};
use mfem_core::checks;
use mfem_core::energy;
use mfem_core::integrator::{self, Mode, RunConfig, Trajectory, ENERGY_SLACK};
use mfem_core::problem::{preset, Preset, PresetName};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Timed criteria take this exclusively so that the long runs sharing the
/// test binary do not distort their wall clock.
static CLOCK: RwLock<()> = RwLock::new(());

/// Allen–Cahn runs use `dt = DT_PER_EPS · ε`. The preset value `1e−5 · ε`
/// needs around 10⁸ steps for runs that only reach the `t_end` cap.
const DT_PER_EPS: f64 = 1e-3;

const SEED: u64 = 20_240_601;

fn verdict(id: u32, pass: bool, detail: &str) {
    let line = format!("{} criterion {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    // bypass the test harness capture so the line always shows
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn within(v: Option<f64>, lo: f64, hi: f64) -> bool {
    v.is_some_and(|v| (lo..=hi).contains(&v))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3}"))
}

struct Cell {
    n: usize,
    traj: Trajectory,
    report: analysis::ErrorReport,
}

struct Sweep {
    label: String,
    cells: Vec<Cell>,
}

impl Sweep {
    fn table(&self, pick: impl Fn(&analysis::ErrorReport) -> f64, label: &str) -> OrderTable {
        let rows: Vec<(usize, f64)> = self.cells.iter().map(|c| (c.n, pick(&c.report))).collect();
        analysis::orders(&rows, label).unwrap()
    }

    fn cell(&self, n: usize) -> &Cell {
        self.cells.iter().find(|c| c.n == n).unwrap()
    }
}

fn sweep(pr: &Preset, ns: &[usize], tweak: impl Fn(&mut RunConfig)) -> Sweep {
    let _busy = CLOCK.read().unwrap_or_else(|e| e.into_inner());
    let exact = pr.exact.as_ref().unwrap();
    let mut cells = Vec::new();
    for &n in ns {
        let mut cfg = RunConfig::from_preset(pr, n);
        cfg.record_every = 1000;
        tweak(&mut cfg);
        let traj = integrator::run_preset(pr, &cfg).unwrap_or_else(|f| panic!("{} N={n}: {f}", pr.label()));
        let fin = &traj.final_state;
        let report = analysis::error_report(&fin.fun, exact, fin.t, Some(traj.final_energy.energy));
        cells.push(Cell { n, traj, report });
    }
    Sweep { label: pr.label(), cells }
}

fn example1_moving() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| {
        let pr = preset(PresetName::Example1).unwrap();
        sweep(&pr, &pr.defaults.n_list, |_| {})
    })
}

fn example1_frozen() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| {
        let pr = preset(PresetName::Example1).unwrap();
        sweep(&pr, &pr.defaults.n_list, |c| c.mode = Mode::FrozenMesh)
    })
}

fn allen_cahn_sweep(name: PresetName, eps: f64) -> Sweep {
    let pr = preset(name).unwrap();
    sweep(&pr, &pr.defaults.n_list, |c| c.dt = DT_PER_EPS * eps)
}

fn example3() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| allen_cahn_sweep(PresetName::Example3, 0.05))
}

fn example4() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| allen_cahn_sweep(PresetName::Example4, 0.01))
}

const EXAMPLE2_TIMES: usize = 20;

fn example2() -> &'static Trajectory {
    static S: OnceLock<Trajectory> = OnceLock::new();
    S.get_or_init(|| {
        let _busy = CLOCK.read().unwrap_or_else(|e| e.into_inner());
        let pr = preset(PresetName::Example2).unwrap();
        let mut cfg = RunConfig::from_preset(&pr, 19);
        cfg.record_every = 100;
        cfg.snapshot_times = (0..=EXAMPLE2_TIMES).map(|i| 0.2 * i as f64 / EXAMPLE2_TIMES as f64).collect();
        integrator::run_preset(&pr, &cfg).unwrap()
    })
}

/// Largest `E_δ̃` increase over all accepted steps and over the recorded
/// series.
fn worst_increase(traj: &Trajectory) -> f64 {
    let series = traj
        .energy_series
        .windows(2)
        .map(|w| w[1].penalized - w[0].penalized)
        .fold(f64::NEG_INFINITY, f64::max);
    traj.stats.max_energy_increase.max(series)
}

fn stationary_residual(pr: &Preset, cell: &Cell) -> f64 {
    let g = energy::gradient(&cell.traj.final_state, &pr.problem, pr.defaults.delta_tilde).unwrap();
    g.max_abs()
}

#[test]
fn criterion_1_gradient_oracle() {
    let _clock = CLOCK.write().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["example1", "example2", "example3", "example4", "linear_diffusion"] {
        let pr = mfem_core::problem::preset_by_name(name).unwrap();
        let c = checks::gradient_check(&pr, 100, 10, SEED).unwrap();
        worst = worst.max(c.max_rel());
        parts.push(format!("{name} {:.1e}", c.max_rel()));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-6 && secs <= 5.0;
    verdict(1, pass, &format!("max rel {worst:.2e} ≤ 1e-6 [{}], {secs:.2}s ≤ 5s", parts.join(", ")));
}

#[test]
fn criterion_2_positive_definiteness() {
    let _clock = CLOCK.write().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut failures = 0;
    let mut min_pivot = f64::INFINITY;
    for name in [PresetName::Example1, PresetName::Example3] {
        let pr = preset(name).unwrap();
        let c = checks::definiteness_check(&pr, 50, 10, 1e-4, SEED).unwrap();
        failures += c.failures;
        min_pivot = min_pivot.min(c.min_pivot);
    }
    let singular = checks::constant_state_is_singular(10).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && min_pivot > 0.0 && singular && secs <= 2.0;
    verdict(
        2,
        pass,
        &format!(
            "100 states δ=1e-4: {failures} failures, min pivot {min_pivot:.2e}; constant state δ=0 singular: {singular}; {secs:.2}s ≤ 2s"
        ),
    );
}

/// `(E(z + dt ż) − E(z))/dt + 2Φ(ż)` for one explicit step.
fn dissipation_defect(pr: &Preset, state: &energy::SimState, dt: f64) -> f64 {
    let cfg = RunConfig::from_preset(pr, state.elements());
    let r = integrator::rates(state, &pr.problem, &cfg).unwrap();
    let phi = integrator::dissipation(state, &pr.problem, cfg.delta, &r.du, &r.dx).unwrap();
    let u: Vec<f64> = state.fun.interior_values().iter().zip(&r.du).map(|(a, b)| a + dt * b).collect();
    let x: Vec<f64> = state.partition().interior().iter().zip(&r.dx).map(|(a, b)| a + dt * b).collect();
    let next = state.with_unknowns(dt, &u, &x).unwrap();
    let e1 = energy::penalized_energy(&next, &pr.problem, cfg.delta_tilde).unwrap();
    (e1 - r.grad.penalized_energy()) / dt + 2.0 * phi
}

#[test]
fn criterion_3_energy_decay() {
    let mut runs: Vec<(String, f64)> = Vec::new();
    for s in [example1_moving(), example1_frozen(), example3(), example4()] {
        for c in &s.cells {
            runs.push((format!("{} N={}", s.label, c.n), worst_increase(&c.traj)));
        }
    }
    runs.push(("example2 N=19".into(), worst_increase(example2())));
    let (worst_run, worst) = runs.iter().cloned().fold((String::new(), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let decay_ok = worst <= ENERGY_SLACK;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut ratios = Vec::new();
    for name in [PresetName::Example1, PresetName::Example2, PresetName::Example3, PresetName::Example4, PresetName::LinearDiffusion] {
        let pr = preset(name).unwrap();
        for _ in 0..4 {
            let s = checks::random_state(&pr, 10, &mut rng).unwrap();
            let cfg = RunConfig::from_preset(&pr, 10);
            let r = integrator::rates(&s, &pr.problem, &cfg).unwrap();
            let vu = r.du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let vx = r.dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // a step moving nodes by ~1e-3 of the smallest element
            let dt = 1e-3 * (s.partition().min_gap() / vx.max(1e-300)).min(1.0 / vu.max(1e-300));
            ratios.push(dissipation_defect(&pr, &s, dt) / dissipation_defect(&pr, &s, 0.5 * dt));
        }
    }
    let bad = ratios.iter().filter(|&&r| !((r - 2.0).abs() <= 0.3)).count();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    verdict(
        3,
        decay_ok && bad == 0,
        &format!(
            "{} runs, worst E_δ̃ increase {worst:.2e} ({worst_run}) ≤ 1e-12; defect ratio over {} states in [{lo:.3}, {hi:.3}], {bad} outside 2±0.3",
            runs.len(),
            ratios.len()
        ),
    );
}

const TABLE1_H1: [f64; 5] = [0.3326, 0.1571, 0.0842, 0.0470, 0.0265];
const TABLE1_L2: [f64; 5] = [0.0338, 0.0098, 0.0022, 0.000523, 0.000141];

#[test]
fn criterion_4_example1_adaptive() {
    let s = example1_moving();
    let h1 = s.table(|r| r.err_h1, "H1");
    let l2 = s.table(|r| r.err_l2, "L2");
    let (oh, ol) = (h1.mean_last(3), l2.mean_last(3));
    let mut off = Vec::new();
    for (i, c) in s.cells.iter().enumerate() {
        for (got, want, tag) in [(c.report.err_h1, TABLE1_H1[i], "H1"), (c.report.err_l2, TABLE1_L2[i], "L2")] {
            let rel = (got - want).abs() / want;
            if rel > 0.35 {
                off.push(format!("{tag} N={} {got:.4e} vs {want} ({:+.0}%)", c.n, 100.0 * (got / want - 1.0)));
            }
        }
    }
    let pass = within(oh, 0.6, 1.1) && within(ol, 1.7, 2.2) && off.is_empty();
    let errs: Vec<String> = s.cells.iter().map(|c| format!("{}:{:.4}/{:.2e}", c.n, c.report.err_h1, c.report.err_l2)).collect();
    verdict(
        4,
        pass,
        &format!(
            "H1 order {} in [0.6,1.1], L2 order {} in [1.7,2.2]; errors {}; outside 35%: [{}]",
            fmt_opt(oh),
            fmt_opt(ol),
            errs.join(" "),
            off.join("; ")
        ),
    );
}

#[test]
fn criterion_5_example1_uniform() {
    let (mv, fz) = (example1_moving(), example1_frozen());
    let oh = fz.table(|r| r.err_h1, "H1").mean_last(3);
    let ol = fz.table(|r| r.err_l2, "L2").mean_last(3);
    let beaten: Vec<usize> = mv
        .cells
        .iter()
        .filter(|c| c.n >= 9 && !(c.report.err_h1 < fz.cell(c.n).report.err_h1))
        .map(|c| c.n)
        .collect();
    let pass = within(oh, 0.4, 0.65) && within(ol, 1.4, 1.8) && beaten.is_empty();
    verdict(
        5,
        pass,
        &format!(
            "frozen H1 order {} in [0.4,0.65], L2 order {} in [1.4,1.8]; N with moving H1 ≥ frozen: {beaten:?}",
            fmt_opt(oh),
            fmt_opt(ol)
        ),
    );
}

fn stationary_criterion(id: u32, s: &Sweep, pr: &Preset, extra: impl FnOnce() -> (bool, String)) {
    let oh = s.table(|r| r.err_h1, "H1").mean_last(3);
    let oe = s.table(|r| r.err_energy.unwrap(), "energy").mean_last(3);
    let residuals: Vec<(usize, f64)> = s.cells.iter().map(|c| (c.n, stationary_residual(pr, c))).collect();
    let over: Vec<String> = residuals.iter().filter(|r| !(r.1 <= 1e-5)).map(|(n, r)| format!("N={n} {r:.2e}")).collect();
    let stops: Vec<String> = s.cells.iter().map(|c| format!("{}:{}", c.n, c.traj.stop_reason)).collect();
    let errs: Vec<String> = s
        .cells
        .iter()
        .map(|c| format!("{}:{:.4}/{:.2e}", c.n, c.report.err_h1, c.report.err_energy.unwrap()))
        .collect();
    let (extra_ok, extra_msg) = extra();
    let pass = within(oh, 0.75, 1.2) && within(oe, 1.6, 2.3) && over.is_empty() && extra_ok;
    verdict(
        id,
        pass,
        &format!(
            "H1 order {} in [0.75,1.2], energy order {} in [1.6,2.3]; {extra_msg}; residual > 1e-5: [{}]; errors {}; stops {}",
            fmt_opt(oh),
            fmt_opt(oe),
            over.join(", "),
            errs.join(" "),
            stops.join(" ")
        ),
    );
}

#[test]
fn criterion_6_example3() {
    let s = example3();
    let pr = preset(PresetName::Example3).unwrap();
    stationary_criterion(6, s, &pr, || {
        let e40 = s.cell(40).report.err_energy.unwrap();
        (e40 <= 1e-3, format!("err_eng(N=40) {e40:.3e} ≤ 1e-3"))
    });
}

#[test]
fn criterion_7_example4() {
    let s = example4();
    let pr = preset(PresetName::Example4).unwrap();
    stationary_criterion(7, s, &pr, || {
        let c5 = s.cell(5);
        let eps = 0.01;
        let inside = c5.traj.final_state.partition().interior().iter().all(|x| (x - 0.5).abs() < 5.0 * eps);
        let ok = c5.report.err_h1.is_finite() && inside;
        (ok, format!("N=5 err_h1 {:.4} finite, nodes within 5ε of 0.5: {inside}", c5.report.err_h1))
    });
}

#[test]
fn criterion_8_best_approximation() {
    let s = example3();
    let pr = preset(PresetName::Example3).unwrap();
    let exact = pr.exact.as_ref().unwrap();
    let ns = [10usize, 20, 40];
    let sig: Vec<f64> = {
        let _busy = CLOCK.read().unwrap_or_else(|e| e.into_inner());
        ns.iter().map(|&n| analysis::sigma_n_oracle(exact, 0.0, pr.problem.domain, n, SEED).unwrap().value).collect()
    };
    let order = analysis::orders(&ns.iter().copied().zip(sig.iter().copied()).collect::<Vec<_>>(), "sigma")
        .unwrap()
        .mean_last(2);
    let mut bounds = Vec::new();
    let mut bound_ok = true;
    for (i, &n) in ns[..2].iter().enumerate() {
        let e = s.cell(n).report.err_h1;
        bound_ok &= e <= 2.0 * sig[i];
        bounds.push(format!("N={n} err_h1 {e:.4} vs 2σ {:.4}", 2.0 * sig[i]));
    }
    let pass = bound_ok && within(order, 0.8, 1.2);
    verdict(
        8,
        pass,
        &format!("{}; σ_N {:?} order {} in [0.8,1.2]", bounds.join(", "), sig.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(), fmt_opt(order)),
    );
}

#[test]
fn criterion_9_example2_spreading() {
    let traj = example2();
    let increase = worst_increase(traj);
    let ordered = traj.node_series.iter().all(|(_, x)| x.windows(2).all(|w| w[0] < w[1]))
        && traj.snapshots.iter().all(|s| s.partition().check_nondegenerate().is_ok());
    let spans: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| analysis::seminorm_span(&s.fun, 0.9).map_or(f64::NAN, |(lo, hi)| hi - lo))
        .collect();
    let widening = spans.len() == EXAMPLE2_TIMES + 1 && spans.windows(2).all(|w| w[1] > w[0]);
    let pass = increase <= ENERGY_SLACK && ordered && widening;
    verdict(
        9,
        pass,
        &format!(
            "worst E_δ̃ increase {increase:.2e}, ordering kept: {ordered}, 90% H1 span {:.4} → {:.4} widening at all {} times: {widening}",
            spans.first().copied().unwrap_or(f64::NAN),
            spans.last().copied().unwrap_or(f64::NAN),
            spans.len()
        ),
    );
}
