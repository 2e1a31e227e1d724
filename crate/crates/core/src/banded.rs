//! Symmetric banded matrices and an unpivoted Cholesky factorisation.

use crate::{Error, Result};

/// Symmetric matrix stored by its lower band.
///
/// Row `i` keeps `M[i][i−d]` for `d = 0..=bandwidth` at
/// `bands[i * (bandwidth + 1) + d]`; entries left of column 0 are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    order: usize,
    bandwidth: usize,
    bands: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(order: usize, bandwidth: usize) -> Self {
        Self { order, bandwidth, bands: vec![0.0; order * (bandwidth + 1)] }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        (d <= self.bandwidth && hi < self.order).then(|| hi * (self.bandwidth + 1) + d)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.bands[s])
    }

    /// Add `v` to the symmetric pair `(i, j)`, `(j, i)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band {}", self.bandwidth));
        self.bands[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band {}", self.bandwidth));
        self.bands[s] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order;
        let bw = self.bandwidth;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] += self.bands[i * (bw + 1)] * x[i];
            for d in 1..=bw.min(i) {
                let v = self.bands[i * (bw + 1) + d];
                y[i] += v * x[i - d];
                y[i - d] += v * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.order).map(|i| (0..self.order).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `L Lᵀ` factorisation without pivoting. Fails on the first pivot that
    /// is not positive relative to its diagonal entry.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.order;
        let bw = self.bandwidth;
        let w = bw + 1;
        // l[i*w + d] = L[i][i−d]
        let mut l = vec![0.0; n * w];
        let mut pivots = Vec::with_capacity(n);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            for j in first..=i {
                let mut sum = self.bands[i * w + (i - j)];
                for k in first.max(j.saturating_sub(bw))..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    let diag = self.bands[i * w];
                    if !(sum > f64::EPSILON * diag.abs()) || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    pivots.push(sum);
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { order: n, bandwidth: bw, l, pivots })
    }

    /// Factor and solve `M z = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.cholesky()?.solve(rhs))
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    order: usize,
    bandwidth: usize,
    l: Vec<f64>,
    pivots: Vec<f64>,
}

impl BandedCholesky {
    /// Squared diagonal of `L`, i.e. the pivots of the elimination.
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.order;
        let w = self.bandwidth + 1;
        assert_eq!(rhs.len(), n, "rhs length");
        let mut z = rhs.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for d in 1..=self.bandwidth.min(i) {
                s -= self.l[i * w + d] * z[i - d];
            }
            z[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for d in 1..=self.bandwidth.min(n - 1 - i) {
                s -= self.l[(i + d) * w + d] * z[i + d];
            }
            z[i] = s / self.l[i * w];
        }
        z
    }
}
