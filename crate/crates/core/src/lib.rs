//! Block Lanczos quadratures for transfer functions `B^T (A + sI)^{-1} B` of
//! large sparse symmetric positive definite matrices.
//!
//! The pipeline is: build or load a [`SparseSymOperator`], run
//! [`lanczos::block_lanczos`], extract the string parameters with
//! [`stieltjes::extract`], pick Kreĭn-Nudelman damping with
//! [`knselect::select_spectral`] and evaluate rules from [`quadrature`].

pub mod knselect;
pub mod lanczos;
pub mod linalg;
pub mod mmio;
pub mod par;
pub mod problems;
pub mod quadrature;
pub mod reference;
pub mod scalar;
pub mod selftest;
pub mod stieltjes;
pub mod sweep;
pub mod synthetic;

pub use linalg::{BlockTridiagonal, BlockVector, DenseBlock, LinalgError, SparseSymOperator};
pub use scalar::Scalar;
