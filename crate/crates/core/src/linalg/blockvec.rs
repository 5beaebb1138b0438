//! Tall `n x p` real block vectors and the thin QR used by the Lanczos recursion.

use super::{DenseBlock, LinalgError};

/// Default relative rank-deficiency threshold for [`qr_tall`].
pub const DEFAULT_DEFLATION_TOL: f64 = 1e-12;

/// Column-major `n x p` real array.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * p],
        }
    }

    /// First `p` columns of the `n x n` identity.
    pub fn identity(n: usize, p: usize) -> Self {
        let mut v = Self::zeros(n, p);
        for j in 0..p.min(n) {
            v.col_mut(j)[j] = 1.0;
        }
        v
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for c in cols {
            assert_eq!(c.len(), n, "ragged columns");
            data.extend_from_slice(c);
        }
        Self { n, p, data }
    }

    pub fn from_column_major(n: usize, p: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * p);
        Self { n, p, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self^T * other`, a `p x q` block.
    pub fn t_dot(&self, other: &BlockVector) -> DenseBlock<f64> {
        assert_eq!(self.n, other.n);
        DenseBlock::from_fn(self.p, other.p, |i, j| dot(self.col(i), other.col(j)))
    }

    /// `self * m` for a `p x q` block `m`.
    pub fn mul_block(&self, m: &DenseBlock<f64>) -> BlockVector {
        let mut out = BlockVector::zeros(self.n, m.cols());
        out.add_mul_block(self, m, 1.0);
        out
    }

    /// `self += scale * v * m`.
    pub fn add_mul_block(&mut self, v: &BlockVector, m: &DenseBlock<f64>, scale: f64) {
        assert_eq!(v.p, m.rows());
        assert_eq!(self.p, m.cols());
        assert_eq!(self.n, v.n);
        for j in 0..m.cols() {
            for k in 0..m.rows() {
                let c = scale * m[(k, j)];
                if c == 0.0 {
                    continue;
                }
                let (src, dst) = (v.col(k), &mut self.data[j * self.n..(j + 1) * self.n]);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
    }

    /// `||V^T V - I||_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (&self.t_dot(self) - &DenseBlock::identity(self.p)).frobenius_norm()
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin QR `W = Q R` by twice-iterated classical Gram-Schmidt.
///
/// `R` is upper triangular with non-negative diagonal. A diagonal entry below
/// `deflation_tol * ||W||_F` is reported as [`LinalgError::Deflation`] with the
/// offending column.
pub fn qr_tall(w: &BlockVector, deflation_tol: f64) -> Result<(BlockVector, DenseBlock<f64>), LinalgError> {
    let (n, p) = (w.n(), w.p());
    if n < p {
        return Err(LinalgError::Shape(format!("qr_tall needs n >= p, got {n} < {p}")));
    }
    let wnorm = w.frobenius_norm();
    if wnorm == 0.0 {
        return Err(LinalgError::Deflation { column: 0 });
    }
    let mut q = w.clone();
    let mut r = DenseBlock::zeros(p, p);
    for j in 0..p {
        for _pass in 0..2 {
            for k in 0..j {
                let c = dot(q.col(k), q.col(j));
                r[(k, j)] += c;
                let (head, tail) = q.data.split_at_mut(j * n);
                let qk = &head[k * n..(k + 1) * n];
                for (x, y) in tail[..n].iter_mut().zip(qk) {
                    *x -= c * y;
                }
            }
        }
        let nrm = dot(q.col(j), q.col(j)).sqrt();
        if nrm <= deflation_tol * wnorm {
            return Err(LinalgError::Deflation { column: j });
        }
        r[(j, j)] = nrm;
        for x in q.col_mut(j) {
            *x /= nrm;
        }
    }
    Ok((q, r))
}
