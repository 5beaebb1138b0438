//! Small dense blocks (`p x p` and friends) with partial-pivot LU.

use super::LinalgError;
use crate::scalar::Scalar;
use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Largest block order accepted by [`DenseBlock::inverse`].
pub const MAX_SMALL_ORDER: usize = 64;

/// Row-major dense matrix over a [`Scalar`] field.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlock<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseBlock<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// `x * I_n`.
    pub fn scaled_identity(n: usize, x: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major storage. Panics on a length mismatch.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn scalar(x: T) -> Self {
        Self::from_row_major(1, 1, vec![x])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self^T * rhs` without forming the transpose.
    pub fn tr_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "tr_matmul shape mismatch");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)];
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, x: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * x).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| {
                let a = v.modulus();
                a * a
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(M + M^T) / 2`. For complex entries this is the complex-symmetric part, not the Hermitian one.
    pub fn symmetrize(&self) -> Self {
        assert!(self.is_square());
        let half = T::from_real(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    /// `||M - M^T||_F <= tol * ||M||_F`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let mut skew = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).modulus();
                skew += d * d;
            }
        }
        skew.sqrt() <= tol * self.frobenius_norm()
    }

    pub fn to_complex(&self) -> DenseBlock<Complex64> {
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.to_complex()).collect(),
        }
    }

    pub fn lu(&self) -> Result<Lu<T>, LinalgError> {
        Lu::factor(self)
    }

    /// Inverse via partial-pivot LU; fails when the 1-norm condition estimate exceeds `1/eps`.
    pub fn inverse(&self) -> Result<Self, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Shape(format!(
                "inverse of non-square {}x{} block",
                self.rows, self.cols
            )));
        }
        if self.rows > MAX_SMALL_ORDER {
            return Err(LinalgError::Shape(format!(
                "small_inverse limited to order {MAX_SMALL_ORDER}, got {}",
                self.rows
            )));
        }
        let lu = self.lu()?;
        Ok(lu.inverse())
    }

    /// `self^{-1} * rhs`.
    pub fn solve(&self, rhs: &Self) -> Result<Self, LinalgError> {
        Ok(self.lu()?.solve(rhs))
    }
}

impl DenseBlock<f64> {
    /// Cholesky factor `L` with `M = L L^T`; the matrix is symmetrized first.
    pub fn cholesky(&self) -> Result<DenseBlock<f64>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let n = self.rows;
        let a = self.symmetrize();
        let mut l = DenseBlock::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / djj;
            }
        }
        Ok(l)
    }

    pub fn is_spd(&self) -> bool {
        self.is_symmetric(1e-10) && self.cholesky().is_ok()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let n = self.rows;
        let s = self.symmetrize();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| s[(i, j)]);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseBlock<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for DenseBlock<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &DenseBlock<T> {
    type Output = DenseBlock<T>;
    fn add(self, rhs: Self) -> DenseBlock<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &DenseBlock<T> {
    type Output = DenseBlock<T>;
    fn sub(self, rhs: Self) -> DenseBlock<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &DenseBlock<T> {
    type Output = DenseBlock<T>;
    fn mul(self, rhs: Self) -> DenseBlock<T> {
        self.matmul(rhs)
    }
}

impl<T: Scalar> Neg for &DenseBlock<T> {
    type Output = DenseBlock<T>;
    fn neg(self) -> DenseBlock<T> {
        DenseBlock {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| -a).collect(),
        }
    }
}

/// Mixed real/complex product `real * cplx`.
pub fn mul_rc(a: &DenseBlock<f64>, b: &DenseBlock<Complex64>) -> DenseBlock<Complex64> {
    assert_eq!(a.cols, b.rows);
    DenseBlock::from_fn(a.rows, b.cols, |i, j| {
        (0..a.cols).map(|k| b[(k, j)] * a[(i, k)]).sum()
    })
}

/// Mixed product `cplx * real`.
pub fn mul_cr(a: &DenseBlock<Complex64>, b: &DenseBlock<f64>) -> DenseBlock<Complex64> {
    assert_eq!(a.cols, b.rows);
    DenseBlock::from_fn(a.rows, b.cols, |i, j| {
        (0..a.cols).map(|k| a[(i, k)] * b[(k, j)]).sum()
    })
}

/// Partial-pivot LU factorization `P M = L U` of a square block.
#[derive(Clone, Debug)]
pub struct Lu<T: Scalar> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    cond: f64,
    inv_norm: f64,
}

impl<T: Scalar> Lu<T> {
    fn factor(m: &DenseBlock<T>) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::Shape(format!(
                "LU of non-square {}x{} block",
                m.rows, m.cols
            )));
        }
        let n = m.rows;
        let norm1 = m.norm1();
        if !m.is_finite() || norm1 == 0.0 {
            return Err(LinalgError::SingularBlock { cond: f64::INFINITY });
        }
        let mut a = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].modulus()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= f64::EPSILON * norm1 * 1e-3 || !pmax.is_finite() {
                return Err(LinalgError::SingularBlock { cond: f64::INFINITY });
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= f * u;
                }
            }
        }
        let mut lu = Lu {
            n,
            lu: a,
            perm,
            cond: 0.0,
            inv_norm: 0.0,
        };
        // Blocks are small, so the explicit inverse gives an exact 1-norm condition number.
        let inv_norm = lu.inverse().norm1();
        lu.inv_norm = inv_norm;
        lu.cond = norm1 * inv_norm;
        if !lu.cond.is_finite() || lu.cond > 1.0 / f64::EPSILON {
            return Err(LinalgError::SingularBlock { cond: lu.cond });
        }
        Ok(lu)
    }

    /// 1-norm condition number of the factored block.
    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// `||M^{-1}||_1`.
    pub fn inv_norm1(&self) -> f64 {
        self.inv_norm
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn solve_in_place(&self, x: &mut [T]) {
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&p| x[p]).collect();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.lu[i * n + k] * y[k];
            }
            y[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= self.lu[i * n + k] * y[k];
            }
            y[i] = v / self.lu[i * n + i];
        }
        x.copy_from_slice(&y);
    }

    pub fn solve(&self, rhs: &DenseBlock<T>) -> DenseBlock<T> {
        assert_eq!(rhs.rows, self.n);
        let mut out = DenseBlock::zeros(rhs.rows, rhs.cols);
        let mut col = vec![T::zero(); self.n];
        for j in 0..rhs.cols {
            for i in 0..self.n {
                col[i] = rhs[(i, j)];
            }
            self.solve_in_place(&mut col);
            for i in 0..self.n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> DenseBlock<T> {
        self.solve(&DenseBlock::identity(self.n))
    }
}
