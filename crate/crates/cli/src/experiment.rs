//! N-sweeps over a preset, in parallel across `N`.

use rayon::prelude::*;

use mfem_core::analysis::{self, ErrorReport, OrderTable, SigmaReport};
use mfem_core::integrator::{self, Mode, Trajectory};

use crate::config::ExperimentConfig;

/// One run at one `N`.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub traj: Trajectory,
    pub report: Option<ErrorReport>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub n: usize,
    pub dt: f64,
    /// The run, or the failure message together with whatever was recorded
    /// before it.
    pub outcome: Result<CellRun, (String, Option<Box<Trajectory>>)>,
}

impl Cell {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match &self.outcome {
            Ok(r) => Some(&r.traj),
            Err((_, partial)) => partial.as_deref(),
        }
    }

    pub fn report(&self) -> Option<&ErrorReport> {
        self.outcome.as_ref().ok().and_then(|r| r.report.as_ref())
    }
}

/// All runs of one mode.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub mode: Mode,
    pub cells: Vec<Cell>,
    pub h1: Option<OrderTable>,
    /// L2 error for time-dependent references, energy error for
    /// stationary ones.
    pub second: Option<OrderTable>,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub preset: String,
    pub stationary: bool,
    pub series: Vec<Series>,
    /// Best-approximation oracle per `N`, for stationary references.
    pub sigma: Vec<(usize, Result<SigmaReport, String>)>,
}

impl ResultBundle {
    pub fn failures(&self) -> usize {
        let runs = self.series.iter().flat_map(|s| &s.cells).filter(|c| c.outcome.is_err()).count();
        runs + self.sigma.iter().filter(|(_, r)| r.is_err()).count()
    }
}

fn table(cells: &[Cell], pick: impl Fn(&ErrorReport) -> f64, label: &str) -> Option<OrderTable> {
    let rows: Vec<(usize, f64)> = cells.iter().filter_map(|c| c.report().map(|r| (c.n, pick(r)))).collect();
    if rows.is_empty() {
        return None;
    }
    analysis::orders(&rows, label).ok()
}

fn run_cell(cfg: &ExperimentConfig, n: usize, mode: Mode) -> Cell {
    let pr = &cfg.preset;
    let rc = cfg.run_config(n, mode);
    let outcome = pr
        .initial_partition(n)
        .map_err(|e| (e.to_string(), None))
        .and_then(|p| {
            integrator::run(&pr.problem, pr.initial.as_ref(), p, &rc).map_err(|f| (f.error.to_string(), f.partial))
        })
        .map(|traj| {
            let report = pr.exact.as_ref().map(|ex| {
                let fin = &traj.final_state;
                analysis::error_report(&fin.fun, ex, fin.t, Some(traj.final_energy.energy))
            });
            CellRun { traj, report }
        });
    Cell { n, dt: rc.dt, outcome }
}

fn series(cfg: &ExperimentConfig, mode: Mode, stationary: bool) -> Series {
    let cells: Vec<Cell> = cfg.n_list.par_iter().map(|&n| run_cell(cfg, n, mode)).collect();
    let mut label = cfg.preset.label();
    if mode == Mode::FrozenMesh {
        label.push_str("_frozen");
    }
    let h1 = table(&cells, |r| r.err_h1, "H1");
    let second = if stationary {
        table(&cells, |r| r.err_energy.unwrap_or(f64::NAN), "energy")
    } else {
        table(&cells, |r| r.err_l2, "L2")
    };
    Series { label, mode, cells, h1, second }
}

/// Run every `N` of the configuration. Moving-mesh experiments against a
/// time-dependent reference also run the frozen-mesh baseline.
pub fn run_experiment(cfg: &ExperimentConfig) -> ResultBundle {
    let exact = cfg.preset.exact.as_ref();
    let stationary = exact.is_some_and(|e| e.stationary_energy.is_some());
    let mut modes = vec![cfg.mode()];
    if cfg.mode() == Mode::Moving && exact.is_some() && !stationary {
        modes.push(Mode::FrozenMesh);
    }
    let series = modes.into_iter().map(|m| series(cfg, m, stationary)).collect();
    let sigma = match exact {
        Some(ex) if stationary => cfg
            .n_list
            .par_iter()
            .map(|&n| {
                let r = analysis::sigma_n_oracle(ex, 0.0, cfg.preset.problem.domain, n, cfg.seed);
                (n, r.map_err(|e| e.to_string()))
            })
            .collect(),
        _ => Vec::new(),
    };
    ResultBundle { preset: cfg.preset.label(), stationary, series, sigma }
}
