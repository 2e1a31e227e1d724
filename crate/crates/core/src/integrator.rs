//! Safeguarded forward Euler for `M_δ (u̇, ẋ) = (f, g)`.
//!
//! A candidate step is rejected and the step size halved when it would
//! break the node ordering or raise the penalised energy `E_δ̃`, which is the
//! Lyapunov function of the stabilised system.

use crate::assembly::{self, deinterleave, interleave};
use crate::energy::{self, GradReport, SimState};
use crate::mesh::{FreeKnotFn, Partition};
use crate::problem::{Preset, ProblemSpec, SourceTerm};
use crate::{Error, Result};

/// Energy increase tolerated on an accepted step.
pub const ENERGY_SLACK: f64 = 1e-12;
/// Relative gradient size required to certify a stationary state.
pub const STATIONARY_CERTIFICATE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Moving,
    FrozenMesh,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "moving" => Ok(Self::Moving),
            "frozen" | "frozen_mesh" => Ok(Self::FrozenMesh),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Moving => "moving",
            Self::FrozenMesh => "frozen",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub dt: f64,
    pub delta: f64,
    pub delta_tilde: f64,
    pub t_end: Option<f64>,
    /// Stop once one step lowers `E_δ̃` by less than this and the gradient
    /// certificate holds.
    pub stationary_tol: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub mode: Mode,
    pub max_halvings: u32,
    /// Keep every `record_every`-th accepted step in the energy and node
    /// series; the first and last states are always kept.
    pub record_every: usize,
}

impl RunConfig {
    pub fn from_preset(preset: &Preset, n: usize) -> Self {
        let d = &preset.defaults;
        Self {
            n,
            dt: d.dt,
            delta: d.delta,
            delta_tilde: d.delta_tilde,
            t_end: d.t_end,
            stationary_tol: d.stationary_tol,
            snapshot_times: d.snapshot_times.clone(),
            mode: Mode::Moving,
            max_halvings: 40,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("N = {} must be at least 2", self.n));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.delta >= 0.0) || !(self.delta_tilde >= 0.0) {
            return bad("delta and delta_tilde must be non-negative".into());
        }
        if self.t_end.is_none() && self.stationary_tol.is_none() {
            return bad("set t_end, stationary_tol or both".into());
        }
        if self.t_end.is_some_and(|t| !(t > 0.0)) {
            return bad("t_end must be positive".into());
        }
        if self.stationary_tol.is_some_and(|t| !(t > 0.0)) {
            return bad("stationary_tol must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Horizon,
    Stationary,
    Degenerate,
    StepFloor,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Horizon => "horizon",
            Self::Stationary => "stationary",
            Self::Degenerate => "degenerate",
            Self::StepFloor => "step_floor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub penalized: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub accepted: u64,
    /// Accepted steps that needed at least one halving.
    pub halved_steps: u64,
    pub total_halvings: u64,
    pub rejected_ordering: u64,
    pub rejected_energy: u64,
    /// Largest `E_δ̃(new) − E_δ̃(old)` over all accepted steps.
    pub max_energy_increase: f64,
    pub min_dt: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<SimState>,
    pub energy_series: Vec<EnergySample>,
    /// `(t, x_1..x_{N−1})`, recorded alongside the energy series.
    pub node_series: Vec<(f64, Vec<f64>)>,
    pub stats: StepStats,
    pub stop_reason: StopReason,
    pub final_state: SimState,
    /// `max_k max(|∂E_δ̃/∂u_k|, |∂E_δ̃/∂x_k|)` at the final state (only the
    /// `u` block in frozen-mesh runs).
    pub final_gradient: f64,
    pub final_energy: EnergySample,
}

/// A run that stopped on an error, with everything recorded up to it.
/// `partial` is `None` when the run was rejected before the first step.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Option<Box<Trajectory>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, partial: None }
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.partial {
            Some(p) => write!(f, "{} (stopped at t = {})", self.error, p.final_state.t),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {}

/// Rates `(u̇, ẋ)` at a state together with the gradient they came from.
#[derive(Debug, Clone)]
pub struct Rates {
    pub du: Vec<f64>,
    pub dx: Vec<f64>,
    pub grad: GradReport,
}

/// Solve for the rates. Moving mode uses the full `M_δ`; frozen mode
/// solves `A u̇ = f` with `ẋ = 0`.
pub fn rates(state: &SimState, prob: &ProblemSpec, cfg: &RunConfig) -> Result<Rates> {
    let grad = energy::gradient(state, prob, cfg.delta_tilde)?;
    rates_from_gradient(state, prob, cfg, grad)
}

fn rates_from_gradient(
    state: &SimState,
    prob: &ProblemSpec,
    cfg: &RunConfig,
    grad: GradReport,
) -> Result<Rates> {
    let scale = -1.0 / prob.xi;
    let f: Vec<f64> = grad.de_du.iter().map(|v| scale * v).collect();
    match cfg.mode {
        Mode::Moving => {
            let g: Vec<f64> = grad.de_dx.iter().map(|v| scale * v).collect();
            let mut m = assembly::assemble(state, cfg.delta)?;
            let mut rhs = interleave(&f, &g);
            if let Some(i) = pinned_node(state, prob, &grad) {
                // hold x_i fixed: replace its row and column by the identity
                let j = 2 * i + 1;
                let bw = m.bandwidth();
                for k in j.saturating_sub(bw)..(j + bw + 1).min(m.order()) {
                    m.set(j.max(k), j.min(k), 0.0);
                }
                m.set(j, j, 1.0);
                rhs[j] = 0.0;
            }
            let z = m.solve(&rhs)?;
            let (du, dx) = deinterleave(&z);
            Ok(Rates { du, dx, grad })
        }
        Mode::FrozenMesh => {
            let a = assembly::mass_matrix(state.partition())?.to_banded();
            let du = a.solve(&f)?;
            let dx = vec![0.0; du.len()];
            Ok(Rates { du, dx, grad })
        }
    }
}

fn dirac_location(prob: &ProblemSpec) -> Option<f64> {
    match prob.source {
        SourceTerm::Dirac { location, .. } => Some(location),
        _ => None,
    }
}

/// Interior index of a node sitting exactly on a point load at a local
/// minimum of `E_δ̃` in its position, i.e. the two one-sided derivatives
/// bracket zero. The reported `∂E/∂x` there is the mean of the two.
fn pinned_node(state: &SimState, prob: &ProblemSpec, grad: &GradReport) -> Option<usize> {
    let SourceTerm::Dirac { location, weight } = prob.source else { return None };
    let xs = state.partition().interior();
    let i = xs.iter().position(|&x| x == location)?;
    let half_jump = 0.5 * weight * (state.fun.slope(i) - state.fun.slope(i + 1));
    (grad.de_dx[i].abs() <= half_jump).then_some(i)
}

/// `Φ_h^δ(state; z) = (ξ/2) zᵀ M_δ z` for rates `z = (u̇, ẋ)`.
pub fn dissipation(state: &SimState, prob: &ProblemSpec, delta: f64, du: &[f64], dx: &[f64]) -> Result<f64> {
    let m = assembly::assemble(state, delta)?;
    let z = interleave(du, dx);
    let mz = m.mul_vec(&z);
    Ok(0.5 * prob.xi * z.iter().zip(&mz).map(|(a, b)| a * b).sum::<f64>())
}

/// Result of one accepted Euler step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SimState,
    pub dt: f64,
    pub halvings: u32,
    /// `E_δ̃` before and after.
    pub before: f64,
    pub after: f64,
    /// Unpenalised energy after the step.
    pub energy_after: f64,
    pub rejected_ordering: u32,
    pub rejected_energy: u32,
}

/// One safeguarded forward Euler step of size up to `cfg.dt`.
pub fn step(state: &SimState, prob: &ProblemSpec, cfg: &RunConfig) -> Result<StepOutcome> {
    let r = rates(state, prob, cfg)?;
    step_with(state, prob, cfg, &r, cfg.dt)
}

fn step_with(
    state: &SimState,
    prob: &ProblemSpec,
    cfg: &RunConfig,
    r: &Rates,
    dt: f64,
) -> Result<StepOutcome> {
    let before = r.grad.penalized_energy();
    let u0 = state.fun.interior_values();
    let x0 = state.partition().interior();
    let hard_gap = crate::mesh::HARD_GAP_FACTOR * state.partition().length();
    let load = dirac_location(prob);
    let mut h = dt;
    let mut rejected_ordering = 0;
    let mut rejected_energy = 0;
    for halvings in 0..=cfg.max_halvings {
        let u: Vec<f64> = u0.iter().zip(&r.du).map(|(a, b)| a + h * b).collect();
        let mut x: Vec<f64> = x0.iter().zip(&r.dx).map(|(a, b)| a + h * b).collect();
        if let Some(a0) = load {
            // a node crossing the point load stops on it
            for (xi, &x0i) in x.iter_mut().zip(x0) {
                if (x0i - a0) * (*xi - a0) < 0.0 {
                    *xi = a0;
                }
            }
        }
        let candidate = FreeKnotFn::from_unknowns(&state.fun, &u, &x)
            .ok()
            .filter(|f| f.partition().min_gap() >= hard_gap);
        match candidate {
            None => rejected_ordering += 1,
            Some(fun) => {
                let next = SimState::new(state.t + h, fun);
                let energy = energy::energy(&next, prob)?;
                let after = energy + energy::penalty_energy(next.partition(), cfg.delta_tilde)?;
                if after <= before + ENERGY_SLACK {
                    return Ok(StepOutcome {
                        state: next,
                        dt: h,
                        halvings,
                        before,
                        after,
                        energy_after: energy,
                        rejected_ordering,
                        rejected_energy,
                    });
                }
                rejected_energy += 1;
            }
        }
        h *= 0.5;
    }
    Err(Error::StepFloor { t: state.t, halvings: cfg.max_halvings })
}

/// Nodal interpolant of `initial` on `partition` with the problem's
/// boundary values imposed.
pub fn initial_state(prob: &ProblemSpec, initial: &dyn Fn(f64) -> f64, partition: Partition) -> Result<SimState> {
    let (a, b) = prob.domain;
    if partition.a() != a || partition.b() != b {
        return Err(Error::InvalidConfig(format!(
            "partition [{}, {}] does not match the domain [{a}, {b}]",
            partition.a(),
            partition.b()
        )));
    }
    let f = FreeKnotFn::interpolate(initial, partition);
    let mut values = f.values().to_vec();
    let n = values.len() - 1;
    values[0] = prob.boundary.0;
    values[n] = prob.boundary.1;
    Ok(SimState::new(0.0, FreeKnotFn::new(f.partition().clone(), values)?))
}

/// Integrate from the interpolated initial condition until the horizon or
/// stationarity, whichever comes first.
pub fn run(
    prob: &ProblemSpec,
    initial: &dyn Fn(f64) -> f64,
    partition: Partition,
    cfg: &RunConfig,
) -> std::result::Result<Trajectory, RunFailure> {
    cfg.validate()?;
    prob.validate()?;
    if partition.elements() != cfg.n {
        return Err(Error::LengthMismatch { expected: cfg.n, got: partition.elements() }.into());
    }
    let state = initial_state(prob, initial, partition)?;
    Runner::new(prob, cfg, state).run()
}

/// [`run`] with the mesh held fixed: only `A u̇ = f` is integrated.
pub fn run_frozen_mesh(
    prob: &ProblemSpec,
    initial: &dyn Fn(f64) -> f64,
    partition: Partition,
    cfg: &RunConfig,
) -> std::result::Result<Trajectory, RunFailure> {
    let cfg = RunConfig { mode: Mode::FrozenMesh, ..cfg.clone() };
    run(prob, initial, partition, &cfg)
}

/// Run a preset at `N` elements from its default initial mesh.
pub fn run_preset(preset: &Preset, cfg: &RunConfig) -> std::result::Result<Trajectory, RunFailure> {
    let partition = preset.initial_partition(cfg.n)?;
    run(&preset.problem, preset.initial.as_ref(), partition, cfg)
}

impl Trajectory {
    fn empty(state: SimState) -> Self {
        Self {
            snapshots: Vec::new(),
            energy_series: Vec::new(),
            node_series: Vec::new(),
            stats: StepStats::default(),
            stop_reason: StopReason::Degenerate,
            final_gradient: f64::NAN,
            final_energy: EnergySample { t: state.t, penalized: f64::NAN, energy: f64::NAN },
            final_state: state,
        }
    }

    /// Snapshot recorded at time `t`, if any.
    pub fn snapshot_at(&self, t: f64) -> Option<&SimState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

struct Runner<'a> {
    prob: &'a ProblemSpec,
    cfg: &'a RunConfig,
    state: SimState,
    traj: Trajectory,
    pending_snapshots: Vec<f64>,
}

impl<'a> Runner<'a> {
    fn new(prob: &'a ProblemSpec, cfg: &'a RunConfig, state: SimState) -> Self {
        let mut pending: Vec<f64> = cfg
            .snapshot_times
            .iter()
            .copied()
            .filter(|&t| t >= 0.0 && cfg.t_end.is_none_or(|end| t <= end))
            .collect();
        pending.sort_by(f64::total_cmp);
        pending.dedup();
        let traj = Trajectory::empty(state.clone());
        Self { prob, cfg, state, traj, pending_snapshots: pending }
    }

    fn record(&mut self, energy: f64, penalized: f64) {
        let sample = EnergySample { t: self.state.t, penalized, energy };
        self.traj.energy_series.push(sample);
        self.traj.node_series.push((self.state.t, self.state.partition().interior().to_vec()));
    }

    fn take_snapshot_if_due(&mut self) {
        while let Some(&ts) = self.pending_snapshots.first() {
            if self.state.t + 1e-12 * ts.abs().max(1.0) >= ts {
                let mut snap = self.state.clone();
                snap.t = ts;
                self.traj.snapshots.push(snap);
                self.pending_snapshots.remove(0);
            } else {
                break;
            }
        }
    }

    fn finish(mut self, reason: StopReason, grad: Option<&GradReport>) -> Trajectory {
        let (energy, penalized) = match grad {
            Some(g) => (g.energy, g.penalized_energy()),
            None => {
                let e = energy::energy(&self.state, self.prob).unwrap_or(f64::NAN);
                let p = energy::penalty_energy(self.state.partition(), self.cfg.delta_tilde).unwrap_or(f64::NAN);
                (e, e + p)
            }
        };
        let last_recorded = self.traj.energy_series.last().map(|s| s.t);
        if last_recorded != Some(self.state.t) {
            self.record(energy, penalized);
        }
        self.traj.final_gradient = grad.map_or(f64::NAN, |g| self.gradient_size(g));
        self.traj.final_energy = EnergySample { t: self.state.t, penalized, energy };
        self.traj.stop_reason = reason;
        self.traj.final_state = self.state;
        self.traj
    }

    fn gradient_size(&self, g: &GradReport) -> f64 {
        match self.cfg.mode {
            Mode::Moving => g.max_abs(),
            Mode::FrozenMesh => g.de_du.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    fn fail(self, error: Error) -> RunFailure {
        let reason = match error {
            Error::StepFloor { .. } => StopReason::StepFloor,
            _ => StopReason::Degenerate,
        };
        RunFailure { error, partial: Some(Box::new(self.finish(reason, None))) }
    }

    fn run(mut self) -> std::result::Result<Trajectory, RunFailure> {
        let cfg = self.cfg;
        self.traj.stats.min_dt = f64::INFINITY;
        let mut last_decrease = f64::INFINITY;
        let mut since_record = 0usize;
        let mut first = true;
        loop {
            let grad = match energy::gradient(&self.state, self.prob, cfg.delta_tilde) {
                Ok(g) => g,
                Err(e) => return Err(self.fail(e)),
            };
            if first {
                self.record(grad.energy, grad.penalized_energy());
                self.take_snapshot_if_due();
                first = false;
            }
            if let Some(tol) = cfg.stationary_tol {
                let certified = self.gradient_size(&grad)
                    <= STATIONARY_CERTIFICATE * grad.penalized_energy().abs().max(1.0);
                if last_decrease < tol && certified {
                    return Ok(self.finish(StopReason::Stationary, Some(&grad)));
                }
            }
            let remaining = cfg.t_end.map(|end| end - self.state.t);
            if remaining.is_some_and(|r| r <= 1e-12 * cfg.t_end.unwrap_or(1.0).max(1.0)) {
                return Ok(self.finish(StopReason::Horizon, Some(&grad)));
            }

            // land exactly on the next snapshot time or the horizon
            let mut target = None;
            let mut dt = cfg.dt;
            for limit in self.pending_snapshots.first().copied().into_iter().chain(cfg.t_end) {
                if limit > self.state.t && limit - self.state.t <= dt {
                    dt = limit - self.state.t;
                    target = Some(limit);
                }
            }

            let rates = match rates_from_gradient(&self.state, self.prob, cfg, grad) {
                Ok(r) => r,
                Err(e) => return Err(self.fail(e)),
            };
            let out = match step_with(&self.state, self.prob, cfg, &rates, dt) {
                Ok(o) => o,
                Err(e) => return Err(self.fail(e)),
            };
            let stats = &mut self.traj.stats;
            stats.accepted += 1;
            if out.halvings > 0 {
                stats.halved_steps += 1;
                stats.total_halvings += u64::from(out.halvings);
            }
            stats.rejected_ordering += u64::from(out.rejected_ordering);
            stats.rejected_energy += u64::from(out.rejected_energy);
            stats.max_energy_increase = stats.max_energy_increase.max(out.after - out.before);
            stats.min_dt = stats.min_dt.min(out.dt);
            last_decrease = out.before - out.after;

            self.state = out.state;
            if out.halvings == 0 {
                if let Some(t) = target {
                    self.state.t = t;
                }
            }
            since_record += 1;
            if since_record >= cfg.record_every {
                since_record = 0;
                self.record(out.energy_after, out.after);
            }
            self.take_snapshot_if_due();
        }
    }
}
