//! Seeded random instances for property checks and the self-test.

use crate::linalg::{qr_tall, BlockTridiagonal, BlockVector, DenseBlock, SparseSymOperator, DEFAULT_DEFLATION_TOL};
use crate::stieltjes::{reconstruct, StieltjesParams};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

fn random_block<R: Rng>(rng: &mut R, p: usize) -> DenseBlock<f64> {
    DenseBlock::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0))
}

/// SPD block `M^T M / p + c I` with `c` in `[lo, hi]`.
pub fn random_spd_block<R: Rng>(rng: &mut R, p: usize, lo: f64, hi: f64) -> DenseBlock<f64> {
    let m = random_block(rng, p);
    let shift = rng.gen_range(lo..hi);
    (&m.tr_matmul(&m).scale(1.0 / p as f64) + &DenseBlock::scaled_identity(p, shift)).symmetrize()
}

/// Random string parameters with `kappa_hat_1 = I`: SPD `gamma_i` and
/// well-conditioned `kappa_hat_i` (a scaled identity plus a bounded perturbation).
pub fn random_string_params<R: Rng>(rng: &mut R, m: usize, p: usize) -> StieltjesParams {
    let gammas = (0..m).map(|_| random_spd_block(rng, p, 0.2, 2.0)).collect();
    let kappas = (0..m)
        .map(|i| {
            if i == 0 {
                DenseBlock::identity(p)
            } else {
                let scale = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                &DenseBlock::scaled_identity(p, scale) + &random_block(rng, p).scale(0.2 * scale.abs())
            }
        })
        .collect();
    StieltjesParams::new(gammas, kappas).expect("random string parameters are valid by construction")
}

/// SPD block tridiagonal matrix together with its string parameters.
pub fn random_block_tridiagonal<R: Rng>(rng: &mut R, m: usize, p: usize) -> (BlockTridiagonal, StieltjesParams) {
    let params = random_string_params(rng, m, p);
    let t = reconstruct(&params).expect("reconstruction of valid string parameters");
    (t, params)
}

/// Dense symmetric operator `Q diag(lambda) Q^T` with `lambda` uniform in `[lo, hi]` and a random
/// orthonormal `n x p` block.
pub fn random_symmetric_operator<R: Rng>(rng: &mut R, n: usize, p: usize, lo: f64, hi: f64) -> (SparseSymOperator, BlockVector) {
    let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let (q, _) = qr_tall(&BlockVector::from_columns(&cols), DEFAULT_DEFLATION_TOL).expect("random square matrix has full rank");
    let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    let mut trip = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..n).map(|k| q.col(k)[i] * lambda[k] * q.col(k)[j]).sum();
            trip.push((i, j, v));
        }
    }
    let op = SparseSymOperator::from_triplets(n, &trip).expect("dense triplets are in range");
    let b: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let (b, _) = qr_tall(&BlockVector::from_columns(&b), DEFAULT_DEFLATION_TOL).expect("random block has full rank");
    (op, b)
}

/// Shifts with modulus log-uniform in `[1e-2, 1e2]` and argument in `(-0.9 pi, 0.9 pi)`,
/// away from the branch cut of `sqrt(s)`.
pub fn random_shifts<R: Rng>(rng: &mut R, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|_| {
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            Complex64::from_polar(r, rng.gen_range(-0.9 * PI..0.9 * PI))
        })
        .collect()
}
