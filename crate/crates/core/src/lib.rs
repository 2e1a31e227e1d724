//! Moving finite elements for one-dimensional gradient flows.
//!
//! Nodal values *and* node positions of a continuous piecewise-linear
//! function are evolved together. At every instant the rates minimise the
//! discrete Rayleighian (dissipation plus rate of change of energy), which
//! yields the block system `M_δ (u̇, ẋ) = (f, g)` solved here by a banded
//! Cholesky factorisation and advanced with safeguarded forward Euler.
//!
//! Module map:
//!
//! * [`mesh`]: partitions, free-knot functions, the nodal basis `φ_k` and
//!   the node-sensitivity basis `β_k = ∂u_h/∂x_k`.
//! * [`problem`]: energy densities, sources, exact solutions and presets.
//! * [`energy`]: discrete energy, log-spacing penalty, analytic gradients
//!   and a finite-difference oracle.
//! * [`assembly`] / [`banded`]: the dissipation blocks and the interleaved
//!   banded solve.
//! * [`integrator`]: forward Euler with step halving, moving or frozen mesh.
//! * [`analysis`]: error norms, convergence orders, best free-knot
//!   approximation oracle.
//! * [`checks`]: randomized invariant suites shared by the CLI and tests.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod banded;
pub mod checks;
pub mod energy;
mod error;
pub mod integrator;
pub mod mesh;
pub mod problem;
pub mod quadrature;

pub use error::{Error, Result};
