//! Dissipation blocks and the stabilised system matrix.
//!
//! With `y = (u̇, ẋ)` the dissipation is `Φ_h = (ξ/2) yᵀ M₀ y` where
//! `M₀ = [[A, B], [B, C]]`, `A = (∫ φ_k φ_j)`, `B = (∫ φ_k β_j)` and
//! `C = (∫ β_k β_j)`. Adding `δ I` to the position block gives `M_δ`.
//!
//! The unknowns are interleaved as `(u_1, x_1, u_2, x_2, …)`, which turns
//! the three tridiagonal blocks into a single band of half-width 3.

use crate::banded::BandedMatrix;
use crate::energy::SimState;
use crate::mesh::{FreeKnotFn, Partition};
use crate::quadrature::GAUSS3;
use crate::Result;

/// Half-bandwidth of `M_δ` under the interleaved ordering.
pub const HALF_BANDWIDTH: usize = 3;

/// Symmetric tridiagonal matrix over the interior nodes `1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// `diag[k−1] = M_{k,k}`.
    pub diag: Vec<f64>,
    /// `off[k−1] = M_{k,k+1}`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    fn zeros(m: usize) -> Self {
        Self { diag: vec![0.0; m], off: vec![0.0; m.saturating_sub(1)] }
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn to_banded(&self) -> BandedMatrix {
        let m = self.order();
        let mut out = BandedMatrix::zeros(m, 1);
        for i in 0..m {
            out.set(i, i, self.diag[i]);
            if i + 1 < m {
                out.set(i + 1, i, self.off[i]);
            }
        }
        out
    }
}

/// Element-local 2×2 blocks `∫_e ψ_i χ_j` for the two local nodes.
type Local = [[f64; 2]; 2];

fn scatter(target: &mut Tridiagonal, e: usize, n: usize, local: &Local) {
    // local node 0 is global node e, local node 1 is e + 1; interior nodes
    // 1..n map to rows 0..n−1
    let rows = [e.checked_sub(1), (e + 1 < n).then_some(e)];
    for (a, ra) in rows.iter().enumerate() {
        let Some(ra) = *ra else { continue };
        target.diag[ra] += local[a][a];
    }
    if let (Some(r0), Some(_)) = (rows[0], rows[1]) {
        target.off[r0] += local[0][1];
    }
}

/// Mass matrix `A`: `a_{k,k} = (h_{k−1} + h_k)/3`, `a_{k,k+1} = h_k/6`.
pub fn mass_matrix(p: &Partition) -> Result<Tridiagonal> {
    p.check_nondegenerate()?;
    let n = p.elements();
    let mut a = Tridiagonal::zeros(n - 1);
    for e in 0..n {
        let h = p.h(e);
        scatter(&mut a, e, n, &[[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]);
    }
    Ok(a)
}

/// Local blocks on element `e` by 3-point Gauss, with `β_j = −s φ_j` there.
fn local_blocks(fun: &FreeKnotFn, e: usize) -> (Local, Local) {
    let h = fun.partition().h(e);
    let s = fun.slope(e);
    let mut b = [[0.0; 2]; 2];
    let mut c = [[0.0; 2]; 2];
    for q in 0..3 {
        let t = GAUSS3.nodes[q];
        let w = GAUSS3.weights[q] * h;
        let phi = [1.0 - t, t];
        let beta = [-s * phi[0], -s * phi[1]];
        for i in 0..2 {
            for j in 0..2 {
                b[i][j] += w * phi[i] * beta[j];
                c[i][j] += w * beta[i] * beta[j];
            }
        }
    }
    (b, c)
}

/// Coupling block `B`, `b_{k,j} = ∫ φ_k β_j`.
pub fn coupling_matrix(state: &SimState) -> Result<Tridiagonal> {
    Ok(dissipation_blocks(state)?.1)
}

/// Position block `C`, `c_{k,j} = ∫ β_k β_j`.
pub fn position_matrix(state: &SimState) -> Result<Tridiagonal> {
    Ok(dissipation_blocks(state)?.2)
}

fn dissipation_blocks(state: &SimState) -> Result<(Tridiagonal, Tridiagonal, Tridiagonal)> {
    let fun = &state.fun;
    let p = fun.partition();
    let a = mass_matrix(p)?;
    let n = p.elements();
    let mut b = Tridiagonal::zeros(n - 1);
    let mut c = Tridiagonal::zeros(n - 1);
    for e in 0..n {
        let (lb, lc) = local_blocks(fun, e);
        scatter(&mut b, e, n, &lb);
        scatter(&mut c, e, n, &lc);
    }
    Ok((a, b, c))
}

/// The blocks of `M_δ = [[A, B], [B, C + δI]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    pub a: Tridiagonal,
    pub b: Tridiagonal,
    pub c: Tridiagonal,
    pub delta: f64,
}

impl BlockSystem {
    pub fn new(state: &SimState, delta: f64) -> Result<Self> {
        let (a, b, c) = dissipation_blocks(state)?;
        Ok(Self { a, b, c, delta })
    }

    /// Interleaved banded form: row `2(k−1)` is `u_k`, row `2(k−1)+1` is `x_k`.
    pub fn to_banded(&self) -> BandedMatrix {
        let m = self.a.order();
        let mut out = BandedMatrix::zeros(2 * m, HALF_BANDWIDTH);
        for k in 0..m {
            let (u, x) = (2 * k, 2 * k + 1);
            out.set(u, u, self.a.diag[k]);
            out.set(x, u, self.b.diag[k]);
            out.set(x, x, self.c.diag[k] + self.delta);
            if k + 1 < m {
                let (u2, x2) = (u + 2, x + 2);
                out.set(u2, u, self.a.off[k]);
                // b_{k,k+1} = ∫ φ_k β_{k+1} and b_{k+1,k} = ∫ φ_{k+1} β_k agree
                out.set(x2, u, self.b.off[k]);
                out.set(u2, x, self.b.off[k]);
                out.set(x2, x, self.c.off[k]);
            }
        }
        out
    }

    /// Dense `2(N−1)` square matrix in the paper-style block layout
    /// `(u_1..u_{N−1}, x_1..x_{N−1})`.
    pub fn to_dense_blocks(&self) -> Vec<Vec<f64>> {
        let m = self.a.order();
        let mut out = vec![vec![0.0; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                out[i][j] = self.a.get(i, j);
                out[i][m + j] = self.b.get(i, j);
                out[m + i][j] = self.b.get(i, j);
                out[m + i][m + j] = self.c.get(i, j) + if i == j { self.delta } else { 0.0 };
            }
        }
        out
    }
}

/// Assemble `M_δ` in interleaved banded storage.
pub fn assemble(state: &SimState, delta: f64) -> Result<BandedMatrix> {
    Ok(BlockSystem::new(state, delta)?.to_banded())
}

/// Interleave `(f, g)` into `(f_1, g_1, f_2, g_2, …)`.
pub fn interleave(f: &[f64], g: &[f64]) -> Vec<f64> {
    f.iter().zip(g).flat_map(|(&a, &b)| [a, b]).collect()
}

/// Inverse of [`interleave`].
pub fn deinterleave(z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (z.iter().step_by(2).copied().collect(), z.iter().skip(1).step_by(2).copied().collect())
}

/// Solve `M z = rhs` by banded Cholesky.
pub fn solve(m: &BandedMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    m.solve(rhs)
}
