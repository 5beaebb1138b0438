//! Tensor grids with a uniform interior and geometrically graded exterior steps.

use std::f64::consts::PI;

/// `exp(pi / sqrt(n_opt))`; for `n_opt = 0` the factor is unused and `e^pi` is returned.
pub fn optimal_factor(n_opt: usize) -> f64 {
    (PI / (n_opt.max(1) as f64).sqrt()).exp()
}

/// `h_k = h0 q^k` for `k = 1..=n_opt` with `q = exp(pi / sqrt(n_opt))`.
pub fn optimal_steps(n_opt: usize, h0: f64) -> Vec<f64> {
    let q = optimal_factor(n_opt);
    (1..=n_opt).map(|k| h0 * q.powi(k as i32)).collect()
}

/// Closed form of `sum_k h_k = h0 q (q^n - 1) / (q - 1)`.
pub fn exterior_extent(n_opt: usize, h0: f64, q: f64) -> f64 {
    h0 * q * (q.powi(n_opt as i32) - 1.0) / (q - 1.0)
}

/// Interior node counts per axis plus the exterior grading.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub h0: f64,
    pub n_opt: usize,
    pub factor: f64,
}

impl GridSpec {
    /// Unit interior step and the optimal factor for `n_opt`.
    pub fn new(counts: Vec<usize>, n_opt: usize) -> Self {
        Self {
            counts,
            h0: 1.0,
            n_opt,
            factor: optimal_factor(n_opt),
        }
    }

    pub fn with_h0(mut self, h0: f64) -> Self {
        self.h0 = h0;
        self
    }

    pub fn with_factor(mut self, factor: f64) -> Self {
        self.factor = factor;
        self
    }

    fn exterior(&self) -> Vec<f64> {
        (1..=self.n_opt).map(|k| self.h0 * self.factor.powi(k as i32)).collect()
    }
}

/// One grid axis: `n_interior` uniform nodes, `n_opt` graded nodes on each side and
/// Dirichlet nodes at both ends.
///
/// `steps[k]` is the primal step between unknown `k - 1` and unknown `k`, with the
/// Dirichlet nodes at positions `-1` and `n_unknowns()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    steps: Vec<f64>,
    n_opt: usize,
}

impl Axis {
    pub fn new(n_interior: usize, spec: &GridSpec) -> Self {
        let ext = spec.exterior();
        let mut steps: Vec<f64> = ext.iter().rev().copied().collect();
        steps.extend(std::iter::repeat_n(spec.h0, n_interior + 1));
        steps.extend(ext.iter().copied());
        Self { steps, n_opt: spec.n_opt }
    }

    pub fn n_unknowns(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Dual step at unknown `k`: mean of the two adjacent primal steps.
    pub fn dual(&self, k: usize) -> f64 {
        0.5 * (self.steps[k] + self.steps[k + 1])
    }

    /// Node coordinates, with the first interior node at the origin.
    pub fn positions(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_unknowns());
        let mut acc = 0.0;
        for k in 0..self.n_unknowns() {
            acc += self.steps[k];
            x.push(acc);
        }
        let origin = x[self.n_opt];
        x.iter().map(|v| v - origin).collect()
    }

    /// Diagonal and subdiagonal of the symmetrized 1D operator `D^{-1/2} G D^{-1/2}`,
    /// with `G` the conservative second difference and `D` the dual steps.
    pub fn scaled_laplacian(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_unknowns();
        let diag = (0..n).map(|k| (1.0 / self.steps[k] + 1.0 / self.steps[k + 1]) / self.dual(k)).collect();
        let sub = (1..n)
            .map(|k| -1.0 / self.steps[k] / (self.dual(k - 1) * self.dual(k)).sqrt())
            .collect();
        (diag, sub)
    }
}
