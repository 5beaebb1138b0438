//! Dense small-block kernels, tall-skinny QR, shifted block-tridiagonal solves
//! and the sparse symmetric operator.

mod blockvec;
mod dense;
mod sparse;
mod tridiag;

pub use blockvec::{qr_tall, BlockVector, DEFAULT_DEFLATION_TOL};
pub use dense::{mul_cr, mul_rc, DenseBlock, Lu, MAX_SMALL_ORDER};
pub use sparse::SparseSymOperator;
pub use tridiag::{e1_column, solve_shifted_blocktridiag, BlockTridiagonal, ShiftedSolution};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("rank deficiency in QR at column {column}")]
    Deflation { column: usize },
    #[error("singular pivot block {block} in shifted block-tridiagonal solve")]
    SingularPivot { block: usize },
    #[error("singular block (condition estimate {cond:e})")]
    SingularBlock { cond: f64 },
    #[error("block is not positive definite")]
    NotPositiveDefinite,
    #[error("shape error: {0}")]
    Shape(String),
}
