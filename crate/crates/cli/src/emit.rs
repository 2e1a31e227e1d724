//! CSV tables, per-run series and a gnuplot script.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mfem_core::analysis::OrderTable;
use mfem_core::energy::SimState;

use crate::experiment::{ResultBundle, Series};

#[derive(Debug)]
pub struct EmitError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for EmitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for EmitError {}

/// Twelve significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        "nan".into()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<(), EmitError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| EmitError { path: path.clone(), source })?;
    written.push(path);
    Ok(())
}

fn order_of(t: Option<&OrderTable>, n: usize) -> Option<f64> {
    t.and_then(|t| t.rows.iter().find(|r| r.n == n)).and_then(|r| r.order)
}

fn errors_csv(s: &Series, stationary: bool) -> String {
    let mut out = String::from("N,err_h1,order_h1,err_l2_or_eng,order_2\n");
    for c in &s.cells {
        let (h1, second) = match c.report() {
            Some(r) => (r.err_h1, if stationary { r.err_energy.unwrap_or(f64::NAN) } else { r.err_l2 }),
            None => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.n,
            num(h1),
            opt_num(order_of(s.h1.as_ref(), c.n)),
            num(second),
            opt_num(order_of(s.second.as_ref(), c.n))
        );
    }
    out
}

fn runs_csv(s: &Series) -> String {
    let mut out = String::from("N,mode,dt,accepted,halved_steps,t_final,stop_reason,error\n");
    for c in &s.cells {
        let (accepted, halved, t, stop) = match c.trajectory() {
            Some(t) => (t.stats.accepted, t.stats.halved_steps, t.final_state.t, t.stop_reason.to_string()),
            None => (0, 0, f64::NAN, String::new()),
        };
        let err = c.outcome.as_ref().err().map(|(m, _)| m.replace(',', ";")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{accepted},{halved},{},{stop},{err}", c.n, s.mode, num(c.dt), num(t));
    }
    out
}

fn snapshot_csv(s: &SimState) -> String {
    let mut out = String::from("x_k,u_k\n");
    for (x, u) in s.partition().nodes().iter().zip(s.fun.values()) {
        let _ = writeln!(out, "{},{}", num(*x), num(*u));
    }
    out
}

pub fn snapshot_name(label: &str, n: usize, t: f64) -> String {
    format!("snapshot_{label}_N{n}_t{t}.csv")
}

fn plot_script(bundle: &ResultBundle) -> String {
    let mut g = String::new();
    let _ = writeln!(g, "# gnuplot script for {}; run with `gnuplot {}`", bundle.preset, plot_name(bundle));
    g.push_str("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n");
    for s in &bundle.series {
        let ns: Vec<usize> = s.cells.iter().filter(|c| c.trajectory().is_some()).map(|c| c.n).collect();
        if ns.is_empty() {
            continue;
        }
        if s.h1.is_some() {
            let _ = writeln!(
                g,
                "\nset output 'errors_{0}.png'\nset logscale xy\nset xlabel 'N'\nplot 'errors_{0}.csv' using 1:2 with linespoints, '' using 1:4 with linespoints\nunset logscale",
                s.label
            );
        }
        let _ = write!(g, "\nset output 'energy_{}.png'\nset xlabel 't'\nplot", s.label);
        let curves: Vec<String> =
            ns.iter().map(|n| format!(" 'energy_{}_N{n}.csv' using 1:2 with lines title 'N={n}'", s.label)).collect();
        let _ = writeln!(g, "{}", curves.join(","));
        for c in s.cells.iter().filter_map(|c| c.trajectory().map(|t| (c.n, t))) {
            let (n, traj) = c;
            if n < 2 {
                continue;
            }
            let _ = writeln!(
                g,
                "\nset output 'nodes_{0}_N{n}.png'\nset xlabel 't'\nplot for [k=2:{1}] 'nodes_{0}_N{n}.csv' using 1:k with lines notitle",
                s.label,
                n
            );
            if !traj.snapshots.is_empty() {
                let files: Vec<String> = traj
                    .snapshots
                    .iter()
                    .map(|sn| format!(" '{}' using 1:2 with linespoints title 't={}'", snapshot_name(&s.label, n, sn.t), sn.t))
                    .collect();
                let _ = writeln!(g, "\nset output 'snapshots_{}_N{n}.png'\nset xlabel 'x'\nplot{}", s.label, files.join(","));
            }
        }
    }
    g
}

fn plot_name(bundle: &ResultBundle) -> String {
    format!("plot_{}.gp", bundle.preset)
}

/// Write every artifact of `bundle` into `dir`, creating it if needed.
/// Returns the paths written, in order.
pub fn emit(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for s in &bundle.series {
        if s.h1.is_some() || s.cells.iter().any(|c| c.report().is_some()) {
            write(dir, &format!("errors_{}.csv", s.label), &errors_csv(s, bundle.stationary), &mut written)?;
        }
        if !s.cells.is_empty() {
            write(dir, &format!("runs_{}.csv", s.label), &runs_csv(s), &mut written)?;
        }
        for c in &s.cells {
            let Some(traj) = c.trajectory() else { continue };
            let n = c.n;
            let mut energy = String::from("t,E_penalized,E\n");
            for e in &traj.energy_series {
                let _ = writeln!(energy, "{},{},{}", num(e.t), num(e.penalized), num(e.energy));
            }
            write(dir, &format!("energy_{}_N{n}.csv", s.label), &energy, &mut written)?;

            let mut nodes = String::from("t");
            for k in 1..n {
                let _ = write!(nodes, ",x_{k}");
            }
            nodes.push('\n');
            for (t, xs) in &traj.node_series {
                nodes.push_str(&num(*t));
                for x in xs {
                    nodes.push(',');
                    nodes.push_str(&num(*x));
                }
                nodes.push('\n');
            }
            write(dir, &format!("nodes_{}_N{n}.csv", s.label), &nodes, &mut written)?;

            for snap in &traj.snapshots {
                write(dir, &snapshot_name(&s.label, n, snap.t), &snapshot_csv(snap), &mut written)?;
            }
        }
    }
    if !bundle.sigma.is_empty() {
        let rows: Vec<(usize, f64)> =
            bundle.sigma.iter().filter_map(|(n, r)| r.as_ref().ok().map(|s| (*n, s.value))).collect();
        let table = mfem_core::analysis::orders(&rows, "sigma").ok();
        let mut out = String::from("N,sigma,order,stalled\n");
        for (n, r) in &bundle.sigma {
            match r {
                Ok(s) => {
                    let _ = writeln!(out, "{n},{},{},{}", num(s.value), opt_num(order_of(table.as_ref(), *n)), s.stalled);
                }
                Err(_) => {
                    let _ = writeln!(out, "{n},nan,,");
                }
            }
        }
        write(dir, &format!("sigma_{}.csv", bundle.preset), &out, &mut written)?;
    }
    if bundle.series.iter().any(|s| !s.cells.is_empty()) {
        write(dir, &plot_name(bundle), &plot_script(bundle), &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.3326), "3.32600000000e-1");
        assert_eq!(num(-1.0), "-1.00000000000e0");
        assert_eq!(num(f64::NAN), "nan");
        let v = 0.123_456_789_012_345_6;
        let back: f64 = num(v).parse().unwrap();
        assert!((back - v).abs() <= 5e-12 * v);
    }

    #[test]
    fn snapshot_names() {
        assert_eq!(snapshot_name("example1", 5, 0.0), "snapshot_example1_N5_t0.csv");
        assert_eq!(snapshot_name("example1", 79, 0.04), "snapshot_example1_N79_t0.04.csv");
    }
}
