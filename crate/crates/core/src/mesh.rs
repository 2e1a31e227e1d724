//! Partitions and free-knot piecewise-linear functions.
//!
//! Elements are indexed from zero: element `e` is `[x_e, x_{e+1}]` with
//! length `h_e`. Nodal hats `φ_k` are indexed by node, `0..=N`; only the
//! interior ones `1..N` are unknowns.

use crate::{Error, Result};

/// Relative gap below which a mesh is treated as collapsed.
pub const HARD_GAP_FACTOR: f64 = 1e-12;
/// Relative gap that is reported as nearly degenerate in diagnostics.
pub const WARN_GAP_FACTOR: f64 = 1e-6;

/// Which element to use when a derivative is queried exactly at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Ordered node set `a = x_0 < x_1 < … < x_N = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    /// Build from the endpoints and the interior nodes `x_1..x_{N-1}`.
    pub fn new(a: f64, b: f64, interior: &[f64]) -> Result<Self> {
        let mut nodes = Vec::with_capacity(interior.len() + 2);
        nodes.push(a);
        nodes.extend_from_slice(interior);
        nodes.push(b);
        Self::from_nodes(nodes)
    }

    /// Build from the full node list including both endpoints.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidSize(nodes.len().saturating_sub(1)));
        }
        let (a, b) = (nodes[0], nodes[nodes.len() - 1]);
        if !(a < b) {
            return Err(Error::InvalidBounds { a, b });
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[0] < w[1]) || !w[1].is_finite() {
                return Err(Error::Unordered { index: i + 1 });
            }
        }
        Ok(Self { nodes })
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidBounds { a, b });
        }
        if n < 2 {
            return Err(Error::InvalidSize(n));
        }
        let len = b - a;
        let mut nodes: Vec<f64> = (0..=n).map(|k| a + len * k as f64 / n as f64).collect();
        nodes[n] = b;
        Ok(Self { nodes })
    }

    /// Number of elements `N`.
    #[inline]
    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.b() - self.a()
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn interior(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    #[inline]
    pub fn h(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn element_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    /// Element containing `x`; a point exactly on an interior node belongs to
    /// the element on its left.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let (a, b) = (self.a(), self.b());
        if !(a..=b).contains(&x) {
            return Err(Error::OutOfDomain { x, a, b });
        }
        let idx = self.nodes.partition_point(|&n| n < x);
        Ok(idx.saturating_sub(1).min(self.elements() - 1))
    }

    pub fn min_gap(&self) -> f64 {
        self.element_lengths().fold(f64::INFINITY, f64::min)
    }

    pub fn degeneracy(&self, threshold: f64) -> DegeneracyReport {
        let (idx, min_gap) = self
            .element_lengths()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, h)| if h < acc.1 { (i, h) } else { acc });
        let is_degenerate = min_gap < threshold;
        DegeneracyReport {
            min_gap,
            is_degenerate,
            offending_index: is_degenerate.then_some(idx),
        }
    }

    /// Fails with [`Error::DegenerateMesh`] if an element is shorter than
    /// `HARD_GAP_FACTOR · (b − a)`.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let report = self.degeneracy(HARD_GAP_FACTOR * self.length());
        match report.offending_index {
            Some(index) => Err(Error::DegenerateMesh { index, gap: report.min_gap }),
            None => Ok(()),
        }
    }

    /// Copy with the interior nodes replaced, keeping the endpoints.
    pub fn with_interior(&self, interior: &[f64]) -> Result<Self> {
        if interior.len() != self.elements() - 1 {
            return Err(Error::LengthMismatch { expected: self.elements() - 1, got: interior.len() });
        }
        Self::new(self.a(), self.b(), interior)
    }

    /// Hat function of node `k` (`0..=N`, boundary hats included).
    pub fn hat(&self, k: usize, x: f64) -> f64 {
        let n = self.elements();
        if k > n {
            return 0.0;
        }
        let xs = &self.nodes;
        if k > 0 && x >= xs[k - 1] && x <= xs[k] {
            return (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        }
        if k < n && x >= xs[k] && x <= xs[k + 1] {
            return (xs[k + 1] - x) / (xs[k + 1] - xs[k]);
        }
        0.0
    }

    /// Interior nodal basis function `φ_k`, `1 ≤ k ≤ N−1`.
    pub fn basis_phi(&self, k: usize, x: f64) -> Result<f64> {
        let max = self.elements() - 1;
        if k == 0 || k > max {
            return Err(Error::IndexOutOfRange { index: k, max });
        }
        Ok(self.hat(k, x))
    }
}

/// Result of a mesh-gap scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyReport {
    pub min_gap: f64,
    pub is_degenerate: bool,
    /// Element with the smallest gap, set only when degenerate.
    pub offending_index: Option<usize>,
}

/// A continuous piecewise-linear function on a free-knot partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeKnotFn {
    partition: Partition,
    values: Vec<f64>,
}

impl FreeKnotFn {
    pub fn new(partition: Partition, values: Vec<f64>) -> Result<Self> {
        let expected = partition.nodes().len();
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, got: values.len() });
        }
        Ok(Self { partition, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(f: impl Fn(f64) -> f64, partition: Partition) -> Self {
        let values = partition.nodes().iter().map(|&x| f(x)).collect();
        Self { partition, values }
    }

    /// Assemble from the `2(N−1)` unknowns and fixed boundary data.
    pub fn from_unknowns(template: &FreeKnotFn, u: &[f64], x: &[f64]) -> Result<Self> {
        let partition = template.partition.with_interior(x)?;
        let n = partition.elements();
        if u.len() != n - 1 {
            return Err(Error::LengthMismatch { expected: n - 1, got: u.len() });
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(template.values[0]);
        values.extend_from_slice(u);
        values.push(template.values[n]);
        Ok(Self { partition, values })
    }

    #[inline]
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn elements(&self) -> usize {
        self.partition.elements()
    }

    /// Interior values `u_1..u_{N−1}`.
    #[inline]
    pub fn interior_values(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    /// Slope `D_h u_e` on element `e`.
    #[inline]
    pub fn slope(&self, e: usize) -> f64 {
        (self.values[e + 1] - self.values[e]) / self.partition.h(e)
    }

    /// Value at `x` on a known element.
    #[inline]
    pub fn eval_on(&self, e: usize, x: f64) -> f64 {
        let xs = self.partition.nodes();
        let t = (x - xs[e]) / (xs[e + 1] - xs[e]);
        self.values[e] + t * (self.values[e + 1] - self.values[e])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let e = self.partition.locate(x)?;
        let xs = self.partition.nodes();
        // exact nodal values
        if x == xs[e + 1] {
            return Ok(self.values[e + 1]);
        }
        Ok(self.eval_on(e, x))
    }

    /// `∂_x u_h` at `x`; at a node the `side` flag picks the element.
    pub fn derivative(&self, x: f64, side: Side) -> Result<f64> {
        let mut e = self.partition.locate(x)?;
        let xs = self.partition.nodes();
        if side == Side::Right && x == xs[e + 1] && e + 1 < self.elements() {
            e += 1;
        }
        Ok(self.slope(e))
    }

    /// `β_k = ∂u_h/∂x_k` restricted to `element`, evaluated at `x`.
    ///
    /// On the element left of `x_k` this is `−D_h u_{k−1} φ_k`, on the right
    /// one `−D_h u_k φ_k`, and zero elsewhere. The value at `x_k` itself is
    /// double valued, hence the explicit element.
    pub fn basis_beta(&self, k: usize, element: usize, x: f64) -> Result<f64> {
        let n = self.elements();
        if k == 0 || k >= n {
            return Err(Error::IndexOutOfRange { index: k, max: n - 1 });
        }
        if element + 1 != k && element != k {
            return Ok(0.0);
        }
        let h = self.partition.h(element);
        if !(h > 0.0) {
            return Err(Error::DegenerateMesh { index: element, gap: h });
        }
        let xs = self.partition.nodes();
        if x < xs[element] || x > xs[element + 1] {
            return Ok(0.0);
        }
        let phi = if element + 1 == k { (x - xs[element]) / h } else { (xs[element + 1] - x) / h };
        Ok(-self.slope(element) * phi)
    }
}

/// Uniform partition of `[a, b]` into `n` elements.
pub fn make_uniform_partition(a: f64, b: f64, n: usize) -> Result<Partition> {
    Partition::uniform(a, b, n)
}
