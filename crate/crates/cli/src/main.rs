use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfem_cli::{config, emit, run_experiment};
use mfem_core::checks;
use mfem_core::integrator::Mode;
use mfem_core::problem::{preset_by_name, PresetName};

const CONFIG_ERROR: u8 = 2;
const PARTIAL_FAILURE: u8 = 1;

/// Moving finite element experiments for 1D gradient flows.
#[derive(Debug, Parser)]
#[command(name = "mfem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks and oracle multistarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step, overriding the config and preset.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// `moving` or `frozen`.
    #[arg(long, global = true)]
    mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a key=value config file.
    Run { config: PathBuf },
    /// List the available presets.
    ListPresets,
    /// Run the gradient and positive-definiteness invariant suites.
    Check,
}

fn run(cli: &Cli, path: &Path) -> ExitCode {
    let mut cfg = match config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = cli.dt {
        cfg.overrides.dt = Some(dt);
    }
    if let Some(mode) = cli.mode {
        cfg.overrides.mode = Some(mode);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }

    let bundle = run_experiment(&cfg);
    for s in &bundle.series {
        for c in &s.cells {
            match (&c.outcome, c.report()) {
                (Err((msg, _)), _) => eprintln!("{} N={}: failed: {msg}", s.label, c.n),
                (Ok(r), Some(rep)) => println!(
                    "{} N={}: err_h1 {:.4e}, {} {:.4e}, stop {}",
                    s.label,
                    c.n,
                    rep.err_h1,
                    if bundle.stationary { "err_eng" } else { "err_l2" },
                    if bundle.stationary { rep.err_energy.unwrap_or(f64::NAN) } else { rep.err_l2 },
                    r.traj.stop_reason
                ),
                (Ok(r), None) => println!("{} N={}: stop {} at t = {}", s.label, c.n, r.traj.stop_reason, r.traj.final_state.t),
            }
        }
    }
    match emit::emit(&bundle, &cfg.out) {
        Ok(files) => println!("wrote {} files to {}", files.len(), cfg.out.display()),
        Err(e) => {
            eprintln!("write failed: {e}");
            return ExitCode::from(PARTIAL_FAILURE);
        }
    }
    if bundle.failures() > 0 {
        eprintln!("{} run(s) failed", bundle.failures());
        return ExitCode::from(PARTIAL_FAILURE);
    }
    ExitCode::SUCCESS
}

fn list_presets() -> ExitCode {
    for name in PresetName::LISTED {
        let summary = match preset_by_name(&name.replace("<eps>", "0.05")) {
            Ok(p) => {
                let (a, b) = p.problem.domain;
                let d = &p.defaults;
                let stop = match (d.t_end, d.stationary_tol) {
                    (Some(t), None) => format!("t_end {t}"),
                    (Some(t), Some(tol)) => format!("stationary tol {tol:e}, t_end cap {t}"),
                    (None, Some(tol)) => format!("stationary tol {tol:e}"),
                    (None, None) => String::new(),
                };
                format!("domain ({a}, {b}), N {:?}, dt {:e}, {stop}", d.n_list, d.dt)
            }
            Err(e) => e.to_string(),
        };
        println!("{name:<18} {summary}");
    }
    ExitCode::SUCCESS
}

fn check(cli: &Cli) -> ExitCode {
    let seed = cli.seed.unwrap_or(0);
    let mut ok = true;
    for name in ["example1", "example2", "example3", "example4", "linear_diffusion"] {
        let pr = preset_by_name(name).expect("listed preset");
        match checks::gradient_check(&pr, 100, 10, seed) {
            Ok(c) => {
                let pass = c.max_rel() <= 1e-6;
                ok &= pass;
                println!("gradient   {name:<18} max rel {:.2e} {}", c.max_rel(), if pass { "ok" } else { "FAIL" });
            }
            Err(e) => {
                ok = false;
                println!("gradient   {name:<18} error: {e}");
            }
        }
        match checks::definiteness_check(&pr, 100, 10, pr.defaults.delta, seed) {
            Ok(c) => {
                let pass = c.failures == 0;
                ok &= pass;
                println!(
                    "definite   {name:<18} {} of {} failed, min pivot {:.2e} {}",
                    c.failures,
                    c.states,
                    c.min_pivot,
                    if pass { "ok" } else { "FAIL" }
                );
            }
            Err(e) => {
                ok = false;
                println!("definite   {name:<18} error: {e}");
            }
        }
    }
    let singular = checks::constant_state_is_singular(10).unwrap_or(false);
    ok &= singular;
    println!("singular   constant state, delta = 0: {}", if singular { "ok" } else { "FAIL" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(PARTIAL_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::ListPresets => list_presets(),
        Command::Check => check(&cli),
    }
}
