//! Symmetric block tridiagonal matrices and the shifted block-Thomas solve.

use super::{DenseBlock, LinalgError};
use crate::scalar::Scalar;

/// Symmetric block tridiagonal `T_m` with `p x p` blocks.
///
/// `betas[k]` is the subdiagonal block in block row `k + 1`; the superdiagonal
/// holds its transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTridiagonal {
    p: usize,
    alphas: Vec<DenseBlock<f64>>,
    betas: Vec<DenseBlock<f64>>,
}

impl BlockTridiagonal {
    pub fn new(alphas: Vec<DenseBlock<f64>>, betas: Vec<DenseBlock<f64>>) -> Result<Self, LinalgError> {
        let m = alphas.len();
        if m == 0 {
            return Err(LinalgError::Shape("block tridiagonal needs m >= 1".into()));
        }
        if betas.len() + 1 != m {
            return Err(LinalgError::Shape(format!(
                "expected {} subdiagonal blocks, got {}",
                m - 1,
                betas.len()
            )));
        }
        let p = alphas[0].rows();
        if alphas.iter().chain(&betas).any(|b| b.rows() != p || b.cols() != p) {
            return Err(LinalgError::Shape("all blocks must be p x p".into()));
        }
        Ok(Self { p, alphas, betas })
    }

    /// Scalar (`p = 1`) tridiagonal from diagonal and subdiagonal entries.
    pub fn from_scalars(diag: &[f64], sub: &[f64]) -> Result<Self, LinalgError> {
        Self::new(
            diag.iter().map(|&a| DenseBlock::scalar(a)).collect(),
            sub.iter().map(|&b| DenseBlock::scalar(b)).collect(),
        )
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn alphas(&self) -> &[DenseBlock<f64>] {
        &self.alphas
    }

    pub fn betas(&self) -> &[DenseBlock<f64>] {
        &self.betas
    }

    /// `alpha_i`, 1-based.
    pub fn alpha(&self, i: usize) -> &DenseBlock<f64> {
        &self.alphas[i - 1]
    }

    /// `beta_i` for `i = 2..=m`, 1-based.
    pub fn beta(&self, i: usize) -> &DenseBlock<f64> {
        &self.betas[i - 2]
    }

    /// Leading `k x k` block principal submatrix.
    pub fn truncated(&self, k: usize) -> Self {
        assert!(k >= 1 && k <= self.m());
        Self {
            p: self.p,
            alphas: self.alphas[..k].to_vec(),
            betas: self.betas[..k - 1].to_vec(),
        }
    }

    pub fn to_dense(&self) -> DenseBlock<f64> {
        let (m, p) = (self.m(), self.p);
        let mut t = DenseBlock::zeros(m * p, m * p);
        for (k, a) in self.alphas.iter().enumerate() {
            for i in 0..p {
                for j in 0..p {
                    t[(k * p + i, k * p + j)] = a[(i, j)];
                }
            }
        }
        for (k, b) in self.betas.iter().enumerate() {
            for i in 0..p {
                for j in 0..p {
                    t[((k + 1) * p + i, k * p + j)] = b[(i, j)];
                    t[(k * p + j, (k + 1) * p + i)] = b[(i, j)];
                }
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.alphas.iter().map(|a| a.frobenius_norm().powi(2)).sum();
        let o: f64 = self.betas.iter().map(|b| b.frobenius_norm().powi(2)).sum();
        (d + 2.0 * o).sqrt()
    }

    /// Block-row products `T x` for a block column `x` of `m` blocks.
    pub fn apply<T: Scalar>(&self, x: &[DenseBlock<T>]) -> Vec<DenseBlock<T>> {
        let m = self.m();
        assert_eq!(x.len(), m);
        (0..m)
            .map(|i| {
                let mut y = real_times(&self.alphas[i], &x[i]);
                if i > 0 {
                    y = &y + &real_times(&self.betas[i - 1], &x[i - 1]);
                }
                if i + 1 < m {
                    y = &y + &real_times(&self.betas[i].transpose(), &x[i + 1]);
                }
                y
            })
            .collect()
    }

    /// Ascending eigenvalues of the assembled matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.to_dense().sym_eigenvalues()
    }

    /// `(T + sI) U = rhs` by block-Thomas elimination.
    pub fn solve_shifted<T: Scalar>(&self, s: T, rhs: &[DenseBlock<T>]) -> Result<ShiftedSolution<T>, LinalgError> {
        let diag: Vec<DenseBlock<T>> = self.alphas.iter().map(lift).collect();
        solve_shifted_blocktridiag(&diag, &self.betas, s, rhs)
    }

    /// `(T + sI) U = E_1`.
    pub fn solve_shifted_e1<T: Scalar>(&self, s: T) -> Result<ShiftedSolution<T>, LinalgError> {
        self.solve_shifted(s, &e1_column(self.m(), self.p))
    }
}

/// Block column `E_1` with `m` blocks of order `p`.
pub fn e1_column<T: Scalar>(m: usize, p: usize) -> Vec<DenseBlock<T>> {
    let mut rhs = vec![DenseBlock::zeros(p, p); m];
    rhs[0] = DenseBlock::identity(p);
    rhs
}

fn lift<T: Scalar>(a: &DenseBlock<f64>) -> DenseBlock<T> {
    DenseBlock::from_fn(a.rows(), a.cols(), |i, j| T::from_real(a[(i, j)]))
}

/// `a * x` with a real left factor.
pub(crate) fn real_times<T: Scalar>(a: &DenseBlock<f64>, x: &DenseBlock<T>) -> DenseBlock<T> {
    assert_eq!(a.cols(), x.rows());
    DenseBlock::from_fn(a.rows(), x.cols(), |i, j| {
        (0..a.cols()).map(|k| x[(k, j)] * T::from_real(a[(i, k)])).sum()
    })
}

/// Solution blocks of a shifted block-tridiagonal solve.
#[derive(Clone, Debug)]
pub struct ShiftedSolution<T: Scalar> {
    pub blocks: Vec<DenseBlock<T>>,
    /// Largest pivot condition estimate `||row||_1 ||D_i^{-1}||_1` met during elimination.
    pub pivot_cond: f64,
}

impl<T: Scalar> ShiftedSolution<T> {
    pub fn first(&self) -> &DenseBlock<T> {
        &self.blocks[0]
    }

    pub fn last(&self) -> &DenseBlock<T> {
        self.blocks.last().expect("non-empty solution")
    }

    /// Frobenius norm of the full `mp x p` block column.
    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Solves `(D + sI) U = rhs` where `D` has diagonal blocks `diag` (any field) and
/// real subdiagonal blocks `sub` (superdiagonal = transpose).
///
/// Fails with [`LinalgError::SingularPivot`] at the first pivot block whose
/// condition estimate exceeds `1/eps`.
pub fn solve_shifted_blocktridiag<T: Scalar>(
    diag: &[DenseBlock<T>],
    sub: &[DenseBlock<f64>],
    s: T,
    rhs: &[DenseBlock<T>],
) -> Result<ShiftedSolution<T>, LinalgError> {
    let m = diag.len();
    assert_eq!(sub.len() + 1, m, "subdiagonal count");
    assert_eq!(rhs.len(), m, "rhs block count");
    let p = diag[0].rows();
    let shift = DenseBlock::scaled_identity(p, s);

    let mut pivots = Vec::with_capacity(m);
    let mut y: Vec<DenseBlock<T>> = Vec::with_capacity(m);
    let mut pivot_cond: f64 = 0.0;
    for i in 0..m {
        let mut d = &diag[i] + &shift;
        let mut yi = rhs[i].clone();
        if i > 0 {
            // D_i -= beta_i D_{i-1}^{-1} beta_i^T ; y_i -= beta_i D_{i-1}^{-1} y_{i-1}
            let lu_prev: &super::Lu<T> = &pivots[i - 1];
            let bt = lift::<T>(&sub[i - 1].transpose());
            let g = lu_prev.solve(&bt);
            d = &d - &real_times(&sub[i - 1], &g);
            let h = lu_prev.solve(&y[i - 1]);
            yi = &yi - &real_times(&sub[i - 1], &h);
        }
        let lu = d.lu().map_err(|_| LinalgError::SingularPivot { block: i + 1 })?;
        // Condition of the pivot relative to the scale of its block row.
        let mut row_scale = (&diag[i] + &shift).norm1();
        if i > 0 {
            row_scale += sub[i - 1].norm1();
        }
        if i + 1 < m {
            row_scale += sub[i].norm1();
        }
        let cond = row_scale * lu.inv_norm1();
        if !cond.is_finite() || cond > 1.0 / f64::EPSILON {
            return Err(LinalgError::SingularPivot { block: i + 1 });
        }
        pivot_cond = pivot_cond.max(cond);
        pivots.push(lu);
        y.push(yi);
    }
    let mut blocks = vec![DenseBlock::zeros(p, rhs[0].cols()); m];
    blocks[m - 1] = pivots[m - 1].solve(&y[m - 1]);
    for i in (0..m - 1).rev() {
        let coupling = real_times(&sub[i].transpose(), &blocks[i + 1]);
        blocks[i] = pivots[i].solve(&(&y[i] - &coupling));
    }
    Ok(ShiftedSolution { blocks, pivot_cond })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_resolvent() {
        let t = BlockTridiagonal::from_scalars(&[2.0], &[]).unwrap();
        let u = t.solve_shifted_e1(1.0).unwrap();
        assert!((u.first()[(0, 0)] - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn two_by_two_against_dense_inverse() {
        // (T + I) = [[3,1],[1,3]], inverse first column = (3, -1)/8
        let t = BlockTridiagonal::from_scalars(&[2.0, 2.0], &[1.0]).unwrap();
        let u = t.solve_shifted_e1(1.0).unwrap();
        assert!((u.blocks[0][(0, 0)] - 0.375).abs() < 1e-15);
        assert!((u.blocks[1][(0, 0)] + 0.125).abs() < 1e-15);
    }

    #[test]
    fn singular_shift_is_reported() {
        let t = BlockTridiagonal::from_scalars(&[2.0, 2.0], &[1.0]).unwrap();
        // eigenvalues 1 and 3; s = -1 hits the first one
        let err = t.solve_shifted_e1(-1.0).unwrap_err();
        assert!(matches!(err, LinalgError::SingularPivot { .. }));
        let t1 = BlockTridiagonal::from_scalars(&[2.0], &[]).unwrap();
        assert_eq!(t1.solve_shifted_e1(-2.0).unwrap_err(), LinalgError::SingularPivot { block: 1 });
    }

    #[test]
    fn dense_assembly_is_symmetric() {
        let a = DenseBlock::from_rows(&[&[2.0, 0.5], &[0.5, 3.0]]);
        let b = DenseBlock::from_rows(&[&[1.0, 0.2], &[0.0, 0.7]]);
        let t = BlockTridiagonal::new(vec![a.clone(), a], vec![b]).unwrap();
        let d = t.to_dense();
        assert!(d.is_symmetric(1e-15));
        assert_eq!(d[(2, 0)], 1.0);
        assert_eq!(d[(0, 2)], 1.0);
        assert_eq!(d[(2, 1)], 0.2);
        assert_eq!(d[(1, 2)], 0.2);
    }

    #[test]
    fn shape_errors() {
        assert!(BlockTridiagonal::new(vec![], vec![]).is_err());
        let a = DenseBlock::<f64>::identity(2);
        assert!(BlockTridiagonal::new(vec![a.clone(), a.clone()], vec![]).is_err());
        assert!(BlockTridiagonal::new(vec![a, DenseBlock::identity(3)], vec![DenseBlock::identity(2)]).is_err());
    }
}
