//! Block Lanczos recursion producing `T_m`, the trailing coefficient
//! `beta_{m+1}` and (optionally) the orthonormal basis.

use crate::linalg::{qr_tall, BlockTridiagonal, BlockVector, DenseBlock, LinalgError, SparseSymOperator, DEFAULT_DEFLATION_TOL};
use thiserror::Error;

/// Full reorthogonalization is the default up to this many basis columns.
pub const FULL_REORTH_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reorth {
    /// Plain three-term recursion.
    None,
    /// Re-orthogonalize each new block against the whole stored basis (twice).
    Full,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// `None` picks `Full` when `m * p <= FULL_REORTH_LIMIT`.
    pub reorth: Option<Reorth>,
    pub store_basis: bool,
    pub deflation_tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            reorth: None,
            store_basis: false,
            deflation_tol: DEFAULT_DEFLATION_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosDecomposition {
    pub tridiag: BlockTridiagonal,
    /// `beta_{m+1}` from the QR of the trailing residual block.
    pub beta_next: DenseBlock<f64>,
    /// `Q_1 .. Q_m` when stored.
    pub basis: Option<Vec<BlockVector>>,
    /// `Q_{m+1}` when stored and the trailing residual had full rank.
    pub q_next: Option<BlockVector>,
    pub reorth: Reorth,
    /// Set when the starting block had to be orthonormalized.
    pub normalized_start: bool,
}

impl LanczosDecomposition {
    pub fn m(&self) -> usize {
        self.tridiag.m()
    }

    pub fn p(&self) -> usize {
        self.tridiag.p()
    }
}

#[derive(Debug, Clone, Error)]
pub enum LanczosError {
    /// The residual block lost rank after `step` full steps; `partial` holds
    /// the decomposition truncated at the last full-rank step.
    #[error("deflation detected after step {step}: residual block has rank {rank}")]
    DeflationDetected {
        step: usize,
        rank: usize,
        partial: Box<LanczosDecomposition>,
    },
    #[error("m * p = {mp} exceeds n = {n}")]
    Dimension { mp: usize, n: usize },
    #[error("basis was not stored")]
    MissingBasis,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl LanczosError {
    /// The truncated decomposition carried by a deflation error.
    pub fn partial(&self) -> Option<&LanczosDecomposition> {
        match self {
            LanczosError::DeflationDetected { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Runs `m` block Lanczos steps on `op` from the starting block `b`.
///
/// `b` is expected to have orthonormal columns; otherwise it is replaced by the
/// `Q` factor of its QR decomposition and `normalized_start` is set.
pub fn block_lanczos(
    op: &SparseSymOperator,
    b: &BlockVector,
    m: usize,
    opts: &LanczosOptions,
) -> Result<LanczosDecomposition, LanczosError> {
    let (n, p) = (op.n(), b.p());
    assert_eq!(b.n(), n, "starting block dimension");
    if m == 0 || m * p > n {
        return Err(LanczosError::Dimension { mp: m * p, n });
    }
    let reorth = opts.reorth.unwrap_or(if m * p <= FULL_REORTH_LIMIT { Reorth::Full } else { Reorth::None });
    let keep_all = opts.store_basis || reorth == Reorth::Full;

    let a_norm = op.norm1();
    let mut normalized_start = false;
    let q1 = if b.is_orthonormal(1e-10) {
        b.clone()
    } else {
        normalized_start = true;
        qr_tall(b, opts.deflation_tol)?.0
    };

    let mut alphas: Vec<DenseBlock<f64>> = Vec::with_capacity(m);
    let mut betas: Vec<DenseBlock<f64>> = Vec::with_capacity(m.saturating_sub(1));
    let mut basis: Vec<BlockVector> = Vec::new();
    let mut q_prev: Option<BlockVector> = None;
    let mut q = q1;

    for step in 1..=m {
        // W = A Q_i - Q_{i-1} beta_i^T
        let mut w = op.apply(&q);
        if let (Some(qp), Some(bi)) = (&q_prev, betas.last()) {
            w.add_mul_block(qp, &bi.transpose(), -1.0);
        }
        let alpha = q.t_dot(&w).symmetrize();
        w.add_mul_block(&q, &alpha, -1.0);
        alphas.push(alpha);
        if keep_all {
            basis.push(q.clone());
        }
        if reorth == Reorth::Full {
            for _ in 0..2 {
                for qj in &basis {
                    let c = qj.t_dot(&w);
                    w.add_mul_block(qj, &c, -1.0);
                }
            }
        }

        // A residual at roundoff level relative to ||A|| means the Krylov space is invariant.
        let qr = if w.frobenius_norm() <= opts.deflation_tol * a_norm {
            Err(LinalgError::Deflation { column: 0 })
        } else {
            qr_tall(&w, opts.deflation_tol)
        };
        match qr {
            Ok((q_next, beta_next)) => {
                if step == m {
                    let tridiag = BlockTridiagonal::new(alphas, betas)?;
                    return Ok(LanczosDecomposition {
                        tridiag,
                        beta_next,
                        basis: opts.store_basis.then_some(basis),
                        q_next: opts.store_basis.then_some(q_next),
                        reorth,
                        normalized_start,
                    });
                }
                betas.push(beta_next);
                q_prev = Some(std::mem::replace(&mut q, q_next));
            }
            Err(LinalgError::Deflation { column }) => {
                // beta_{step+1} from the residual as far as it has rank; exact zero block otherwise.
                let beta_next = residual_coefficients(&w, p, column);
                let tridiag = BlockTridiagonal::new(alphas, betas)?;
                let partial = LanczosDecomposition {
                    tridiag,
                    beta_next,
                    basis: opts.store_basis.then_some(basis),
                    q_next: None,
                    reorth,
                    normalized_start,
                };
                return Err(LanczosError::DeflationDetected {
                    step,
                    rank: column,
                    partial: Box::new(partial),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("loop returns at step m")
}

/// Upper-triangular `R` of a rank-deficient residual, keeping the leading
/// `rank` columns and zeroing the rest.
fn residual_coefficients(w: &BlockVector, p: usize, rank: usize) -> DenseBlock<f64> {
    let mut r = DenseBlock::zeros(p, p);
    if rank == 0 {
        return r;
    }
    let lead = BlockVector::from_columns(&(0..rank).map(|j| w.col(j).to_vec()).collect::<Vec<_>>());
    if let Ok((_, rl)) = qr_tall(&lead, 0.0) {
        for i in 0..rank {
            for j in i..rank {
                r[(i, j)] = rl[(i, j)];
            }
        }
    }
    r
}

/// `||A Q_m - Q_m T_m - Q_{m+1} beta_{m+1} E_m^T||_F / ||A||_1`.
pub fn verify_lanczos_relation(dec: &LanczosDecomposition, op: &SparseSymOperator) -> Result<f64, LanczosError> {
    let basis = dec.basis.as_ref().ok_or(LanczosError::MissingBasis)?;
    let t = &dec.tridiag;
    let m = t.m();
    let mut total = 0.0;
    for i in 0..m {
        // column block i of A Q - Q T
        let mut r = op.apply(&basis[i]);
        r.add_mul_block(&basis[i], &t.alphas()[i], -1.0);
        if i > 0 {
            // T_{i-1,i} = beta_i^T
            r.add_mul_block(&basis[i - 1], &t.betas()[i - 1].transpose(), -1.0);
        }
        if i + 1 < m {
            r.add_mul_block(&basis[i + 1], &t.betas()[i], -1.0);
        } else if let Some(qn) = &dec.q_next {
            r.add_mul_block(qn, &dec.beta_next, -1.0);
        } else if dec.beta_next.max_abs() > 0.0 {
            return Err(LanczosError::MissingBasis);
        }
        total += r.frobenius_norm().powi(2);
    }
    let scale = op.norm1();
    Ok(total.sqrt() / if scale > 0.0 { scale } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(d: &[f64]) -> SparseSymOperator {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseSymOperator::from_triplets(d.len(), &t).unwrap()
    }

    fn ones_normalized(n: usize) -> BlockVector {
        BlockVector::from_columns(&[vec![1.0 / (n as f64).sqrt(); n]])
    }

    #[test]
    fn diag123_two_steps() {
        let op = diag_op(&[1.0, 2.0, 3.0]);
        let opts = LanczosOptions {
            store_basis: true,
            ..Default::default()
        };
        let dec = block_lanczos(&op, &ones_normalized(3), 2, &opts).unwrap();
        let t = &dec.tridiag;
        assert!((t.alpha(1)[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((t.beta(2)[(0, 0)] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((t.alpha(2)[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(verify_lanczos_relation(&dec, &op).unwrap() <= 1e-14);
    }

    #[test]
    fn identity_operator_deflates_at_step_two() {
        let op = diag_op(&[1.0; 6]);
        let b = BlockVector::identity(6, 2);
        let err = block_lanczos(&op, &b, 1, &LanczosOptions::default());
        let LanczosError::DeflationDetected { step, rank, partial } = err.unwrap_err() else {
            panic!("expected deflation");
        };
        assert_eq!((step, rank), (1, 0));
        assert_eq!(partial.tridiag.alpha(1), &DenseBlock::identity(2));
        assert_eq!(partial.beta_next.max_abs(), 0.0);
    }

    #[test]
    fn unnormalized_start_is_normalized() {
        let op = diag_op(&[1.0, 2.0, 3.0]);
        let b = BlockVector::from_columns(&[vec![1.0, 1.0, 1.0]]);
        let dec = block_lanczos(&op, &b, 2, &LanczosOptions::default()).unwrap();
        assert!(dec.normalized_start);
        assert!((dec.tridiag.alpha(1)[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn corrupted_alpha_is_detected() {
        let op = diag_op(&[1.0, 2.0, 3.0, 5.0]);
        let opts = LanczosOptions {
            store_basis: true,
            ..Default::default()
        };
        let mut dec = block_lanczos(&op, &ones_normalized(4), 2, &opts).unwrap();
        let mut alphas = dec.tridiag.alphas().to_vec();
        alphas[0] = &alphas[0] + &DenseBlock::scalar(0.01);
        dec.tridiag = BlockTridiagonal::new(alphas, dec.tridiag.betas().to_vec()).unwrap();
        assert!(verify_lanczos_relation(&dec, &op).unwrap() > 1e-3);
    }

    #[test]
    fn missing_basis_error() {
        let op = diag_op(&[1.0, 2.0, 3.0]);
        let dec = block_lanczos(&op, &ones_normalized(3), 2, &LanczosOptions::default()).unwrap();
        assert!(matches!(verify_lanczos_relation(&dec, &op), Err(LanczosError::MissingBasis)));
    }

    #[test]
    fn too_many_steps() {
        let op = diag_op(&[1.0, 2.0]);
        assert!(matches!(
            block_lanczos(&op, &ones_normalized(2), 3, &LanczosOptions::default()),
            Err(LanczosError::Dimension { .. })
        ));
    }
}
